#pragma once

#include <stdexcept>
#include <string>

namespace phasor {

// Root of every error raised by the library. The CLI maps ValidationError
// (and subclasses) to exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

// Bad user input: malformed config, inconsistent shapes requested by the
// caller, data that violates triplet invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "validation"; }
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
  const char* kind() const noexcept override { return "dimension"; }
};

class DataIntegrityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
  const char* kind() const noexcept override { return "data_integrity"; }
};

class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
  const char* kind() const noexcept override { return "format"; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numeric"; }
};

class DivisionSingularityError : public NumericError {
 public:
  DivisionSingularityError(const std::string& what, std::size_t coordinate)
      : NumericError(what), coordinate_(coordinate) {}
  const char* kind() const noexcept override { return "division_singularity"; }
  std::size_t coordinate() const noexcept { return coordinate_; }

 private:
  std::size_t coordinate_;
};

class OracleError : public NumericError {
 public:
  OracleError(const std::string& what, std::size_t component)
      : NumericError(what), component_(component) {}
  const char* kind() const noexcept override { return "oracle_failure"; }
  std::size_t component() const noexcept { return component_; }

 private:
  std::size_t component_;
};

class UndefinedCorrelationError : public NumericError {
 public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "undefined_correlation"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

}  // namespace phasor
