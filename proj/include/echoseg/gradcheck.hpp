#pragma once

#include <functional>
#include <string>
#include <vector>

#include "echoseg/autograd.hpp"

namespace echoseg {

struct GradCheckReport {
  std::string op_name;
  double max_relative_error = 0.0;
  double tolerance = 1e-4;
  bool passed = false;
  std::size_t n_checked = 0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences (f(x+eps) - f(x-eps)) / 2eps, element by element. The relative
/// error of each element uses max(|analytic|, |numeric|, 1e-8) as denominator.
///
/// `leaves` are perturbed in place and restored afterwards; any existing
/// gradients on them are discarded.
GradCheckReport grad_check(const std::string& op_name,
                           const std::function<Variable<double>()>& f,
                           std::vector<Variable<double>> leaves, double epsilon = 1e-5,
                           double tolerance = 1e-4);

/// Convenience form: each tensor becomes a fresh leaf passed to `f`.
GradCheckReport grad_check(
    const std::string& op_name,
    const std::function<Variable<double>(const std::vector<Variable<double>>&)>& f,
    const std::vector<Tensor<double>>& inputs, double epsilon = 1e-5, double tolerance = 1e-4);

/// sum(x * weights): reduces an op output to a scalar with fixed, non-uniform
/// sensitivities so every output element contributes to the check.
Variable<double> weighted_sum(const Variable<double>& x, const Tensor<double>& weights);

}  // namespace echoseg
