#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phasor {

using DenseVector = std::vector<double>;

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  static Matrix identity(std::size_t n);

  bool operator==(const Matrix&) const = default;
};

// --- vector arithmetic -----------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
DenseVector scaled(std::span<const double> a, double s);
DenseVector add(std::span<const double> a, std::span<const double> b);
DenseVector sub(std::span<const double> a, std::span<const double> b);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
DenseVector concat(std::span<const double> a, std::span<const double> b);

// m * x
DenseVector matvec(const Matrix& m, std::span<const double> x);
// m^T * x
DenseVector matvec_transposed(const Matrix& m, std::span<const double> x);
// m += alpha * u v^T
void add_outer(Matrix& m, double alpha, std::span<const double> u, std::span<const double> v);

bool all_finite(std::span<const double> v);
// Throws NumericError naming `what` if any entry is NaN or infinite.
void require_finite(std::span<const double> v, std::string_view what);

// ||a - b||_2 / max(||a||_2, ||b||_2, floor). The unit floor turns the check
// into an absolute one for gradients that are (near) zero.
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1.0);

// --- randomness ------------------------------------------------------------

// Deterministic PRNG stream. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the distribution transforms are
// implemented here because the std:: distributions are not portable.
// Child streams are derived with a SplitMix64 mix of (seed, stream id).
class RngStream {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64+splitmix64";

  explicit RngStream(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::string algorithm_id() const { return std::string(kAlgorithm); }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal(double mean = 0.0, double std = 1.0);

  // Independent child stream; does not advance this stream.
  RngStream split(std::uint64_t stream_id) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

DenseVector gaussian_sample(RngStream& rng, std::size_t n, double mean, double std);

// --- statistics ------------------------------------------------------------

struct StatSummary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

StatSummary summarize(std::span<const double> values);

// Pearson product-moment correlation. Throws UndefinedCorrelationError when
// either argument has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

// --- finite differences ----------------------------------------------------

using ScalarFunction = std::function<double(std::span<const double>)>;

inline constexpr double kDefaultFdEps = 1e-5;

// Central-difference gradient of f at x. Throws OracleError naming the
// component whose perturbed evaluation was not finite.
DenseVector finite_difference_gradient(const ScalarFunction& f, std::span<const double> x,
                                       double eps = kDefaultFdEps);

}  // namespace phasor
