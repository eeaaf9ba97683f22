#include "echoseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace echoseg {

GradCheckReport grad_check(const std::string& op_name,
                           const std::function<Variable<double>()>& f,
                           std::vector<Variable<double>> leaves, double epsilon,
                           double tolerance) {
  if (!(epsilon > 0.0)) throw ValidationError("grad_check: epsilon must be positive");

  for (auto& leaf : leaves) leaf.clear_grad();
  f().backward();
  std::vector<Tensor<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto& leaf : leaves) {
    analytic.push_back(leaf.has_grad() ? leaf.grad() : Tensor<double>::zeros(leaf.shape()));
    leaf.clear_grad();
  }

  GradCheckReport report;
  report.op_name = op_name;
  report.tolerance = tolerance;
  NoGradGuard no_grad;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto values = leaves[l].mutable_value().data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + epsilon;
      const double plus = f().value()[0];
      values[i] = original - epsilon;
      const double minus = f().value()[0];
      values[i] = original;

      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double exact = analytic[l][i];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      const double err = std::abs(exact - numeric) / denom;
      if (std::isnan(err) || std::isnan(report.max_relative_error)) {
        report.max_relative_error = std::numeric_limits<double>::quiet_NaN();
      } else {
        report.max_relative_error = std::max(report.max_relative_error, err);
      }
      ++report.n_checked;
    }
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

GradCheckReport grad_check(
    const std::string& op_name,
    const std::function<Variable<double>(const std::vector<Variable<double>>&)>& f,
    const std::vector<Tensor<double>>& inputs, double epsilon, double tolerance) {
  std::vector<Variable<double>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.emplace_back(t, true);
  return grad_check(
      op_name, [&f, &leaves]() { return f(leaves); }, leaves, epsilon, tolerance);
}

Variable<double> weighted_sum(const Variable<double>& x, const Tensor<double>& weights) {
  return sum(mul(x, Variable<double>(weights)));
}

}  // namespace echoseg
