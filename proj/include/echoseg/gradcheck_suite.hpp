#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "echoseg/gradcheck.hpp"

namespace echoseg {

enum class GradcheckScope { all, tensor, layers, models };

GradcheckScope parse_gradcheck_scope(const std::string& name);

struct GradcheckSuiteOptions {
  GradcheckScope scope = GradcheckScope::all;
  std::uint64_t seed = 0;
  double epsilon = 1e-5;
  // Full-model losses sum many terms; a wider step keeps rounding noise on
  // their smallest gradients below the tolerance.
  double model_epsilon = 3e-5;
  double tolerance = 1e-4;
  // Inputs are redrawn until every relu input and max-pool gap is at least
  // this far from its kink.
  double kink_margin = 1e-3;
  // Full-model draws are also redrawn while any non-zero gradient is smaller
  // than this.
  double min_gradient = 1e-7;
  // Adds an op with a deliberately wrong backward rule (negative control).
  bool inject_fault = false;
};

/// Double-precision finite-difference checks of every differentiable op at
/// tiny sizes, including the full Vanilla and MatAE training losses.
std::vector<GradCheckReport> run_gradcheck_suite(const GradcheckSuiteOptions& options);

}  // namespace echoseg
