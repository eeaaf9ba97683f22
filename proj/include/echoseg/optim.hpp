#pragma once

#include <cstddef>
#include <vector>

#include "echoseg/layers.hpp"

namespace echoseg {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moments are stored in parameter order.
template <typename T>
struct AdamState {
  AdamOptions options;
  std::size_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
};

/// Adam with bias correction:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
template <typename T>
class Adam {
 public:
  Adam(std::vector<NamedParameter<T>> params, AdamOptions options = {});

  /// Every parameter must carry a gradient (ContractError names the first
  /// one missing).
  void step();
  void zero_grad();

  const AdamState<T>& state() const noexcept { return state_; }
  /// Replaces moments and step count (checkpoint resume). Shapes must match.
  void load_state(AdamState<T> state);
  const std::vector<NamedParameter<T>>& parameters() const noexcept { return params_; }

 private:
  std::vector<NamedParameter<T>> params_;
  AdamState<T> state_;
};

}  // namespace echoseg
