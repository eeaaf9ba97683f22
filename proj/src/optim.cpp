#include "echoseg/optim.hpp"

#include <cmath>

namespace echoseg {

template <typename T>
Adam<T>::Adam(std::vector<NamedParameter<T>> params, AdamOptions options)
    : params_(std::move(params)) {
  state_.options = options;
  for (const auto& p : params_) {
    state_.m.push_back(Tensor<T>::zeros(p.variable.shape()));
    state_.v.push_back(Tensor<T>::zeros(p.variable.shape()));
  }
}

template <typename T>
void Adam<T>::step() {
  for (const auto& p : params_) {
    if (!p.variable.has_grad()) throw ContractError("adam: parameter '" + p.name + "' has no gradient");
  }
  ++state_.step;
  const AdamOptions& o = state_.options;
  const double t = static_cast<double>(state_.step);
  const T b1 = static_cast<T>(o.beta1);
  const T b2 = static_cast<T>(o.beta2);
  const T bias1 = static_cast<T>(1.0 - std::pow(o.beta1, t));
  const T bias2 = static_cast<T>(1.0 - std::pow(o.beta2, t));
  const T lr = static_cast<T>(o.lr);
  const T eps = static_cast<T>(o.eps);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto theta = params_[k].variable.mutable_value().data();
    const auto g = params_[k].variable.grad().data();
    auto m = state_.m[k].data();
    auto v = state_.v[k].data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      const T m_hat = m[i] / bias1;
      const T v_hat = v[i] / bias2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.variable.zero_grad();
}

template <typename T>
void Adam<T>::load_state(AdamState<T> state) {
  if (state.m.size() != params_.size() || state.v.size() != params_.size()) {
    throw IntegrityError("adam state has " + std::to_string(state.m.size()) + " moments for " +
                         std::to_string(params_.size()) + " parameters");
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (state.m[k].shape() != params_[k].variable.shape() ||
        state.v[k].shape() != params_[k].variable.shape()) {
      throw IntegrityError("adam moment shape mismatch for '" + params_[k].name + "'");
    }
  }
  state_ = std::move(state);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace echoseg
