#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "echoseg/tensor.hpp"

namespace echoseg {

template <typename T>
class Variable;

namespace detail {

template <typename T>
struct Node {
  Tensor<T> value;
  std::optional<Tensor<T>> grad;
  bool requires_grad = false;
  std::string op;
  std::vector<std::shared_ptr<Node>> parents;
  // Receives the node's accumulated gradient and pushes contributions to parents.
  std::function<void(const Tensor<T>&)> backward;
};

}  // namespace detail

/// True unless a NoGradGuard is alive on the current thread.
bool grad_enabled() noexcept;

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// While alive, relu and max_pool2x2 forward passes on this thread record the
/// smallest distance of any input to a kink: |x| for relu, and the gap between
/// the winner and the runner-up of a pooling window (exact ties are skipped).
/// Finite-difference checks use it to stay clear of non-differentiable points.
class KinkMonitor {
 public:
  KinkMonitor();
  ~KinkMonitor();
  KinkMonitor(const KinkMonitor&) = delete;
  KinkMonitor& operator=(const KinkMonitor&) = delete;

  double margin() const noexcept { return margin_; }

  static bool active() noexcept;
  static void observe(double distance) noexcept;

 private:
  KinkMonitor* previous_;
  double margin_;
};

/// Handle to a node of the computation graph. Copies share the node.
template <typename T>
class Variable {
 public:
  using BackwardFn = std::function<void(const Tensor<T>&)>;

  Variable() : node_(std::make_shared<detail::Node<T>>()) {}
  explicit Variable(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<detail::Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
    node_->op = "leaf";
  }

  /// Result of an operation. Records `backward` only when grad mode is on
  /// and some parent requires a gradient.
  static Variable from_op(Tensor<T> value, const std::vector<Variable>& parents, BackwardFn backward,
                          std::string op);

  const Tensor<T>& value() const noexcept { return node_->value; }
  // Leaves only; used by optimizers and gradient checking.
  Tensor<T>& mutable_value() noexcept { return node_->value; }
  const Shape& shape() const noexcept { return node_->value.shape(); }
  const std::string& op() const noexcept { return node_->op; }

  bool requires_grad() const noexcept { return node_->requires_grad; }
  bool is_leaf() const noexcept { return node_->parents.empty(); }
  bool has_grad() const noexcept { return node_->grad.has_value(); }
  const Tensor<T>& grad() const;

  void zero_grad();
  void clear_grad() { node_->grad.reset(); }
  void accumulate_grad(const Tensor<T>& contribution) const;

  /// Reverse-mode sweep from this scalar. Gradients accumulate.
  void backward() const;

  bool same_node(const Variable& other) const noexcept { return node_ == other.node_; }

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

// Elementwise (shapes must match exactly).
template <typename T>
Variable<T> add(const Variable<T>& a, const Variable<T>& b);
template <typename T>
Variable<T> sub(const Variable<T>& a, const Variable<T>& b);
template <typename T>
Variable<T> mul(const Variable<T>& a, const Variable<T>& b);
template <typename T>
Variable<T> scale(const Variable<T>& a, T factor);

// Reductions to shape {1}.
template <typename T>
Variable<T> sum(const Variable<T>& a);
template <typename T>
Variable<T> mean(const Variable<T>& a);

template <typename T>
Variable<T> relu(const Variable<T>& a);
template <typename T>
Variable<T> sigmoid(const Variable<T>& a);

// NCHW channel concatenation and its inverse.
template <typename T>
Variable<T> concat_channels(const Variable<T>& a, const Variable<T>& b);
template <typename T>
Variable<T> slice_channels(const Variable<T>& a, std::size_t begin, std::size_t end);

// Numerically stable logistic function on plain values.
template <typename T>
T stable_sigmoid(T z) noexcept;
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a);

}  // namespace echoseg
