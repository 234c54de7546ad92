#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "phasor/losses.hpp"
#include "phasor/numerics.hpp"

namespace phasor {

// Finite-difference certification of every analytic gradient in the library.
struct GradCheckConfig {
  std::size_t instances = 100;
  std::size_t max_items = 8;
  std::size_t max_dim = 16;
  double eps = kDefaultFdEps;
  double tolerance = 1e-5;
  double branch_exclusion = 1e-4;
  Temperatures temps;
  std::uint64_t seed = 0;
};

struct ComponentCheck {
  std::string component;
  std::size_t checked = 0;
  std::size_t excluded = 0;  // instances inside a phase branch neighborhood
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<ComponentCheck> components;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;

  bool passed() const { return max_rel_error < tolerance; }
};

GradCheckReport run_grad_check(const GradCheckConfig& cfg);

void to_json(nlohmann::json& j, const GradCheckReport& r);

}  // namespace phasor
