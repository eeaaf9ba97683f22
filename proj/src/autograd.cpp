#include "echoseg/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace echoseg {

std::string shape_to_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

namespace {
thread_local bool g_grad_enabled = true;

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a) + " vs " +
                     shape_to_string(b));
  }
}

void require_rank4(const Shape& s, const char* op) {
  if (s.size() != 4) {
    throw ShapeError(std::string(op) + ": expected NCHW rank-4 tensor, got " + shape_to_string(s));
  }
}
}  // namespace

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace {
thread_local KinkMonitor* g_kink_monitor = nullptr;
}

KinkMonitor::KinkMonitor()
    : previous_(g_kink_monitor), margin_(std::numeric_limits<double>::infinity()) {
  g_kink_monitor = this;
}
KinkMonitor::~KinkMonitor() { g_kink_monitor = previous_; }

bool KinkMonitor::active() noexcept { return g_kink_monitor != nullptr; }

void KinkMonitor::observe(double distance) noexcept {
  if (g_kink_monitor != nullptr && distance < g_kink_monitor->margin_) g_kink_monitor->margin_ = distance;
}

template <typename T>
Variable<T> Variable<T>::from_op(Tensor<T> value, const std::vector<Variable>& parents,
                                 BackwardFn backward, std::string op) {
  Variable out(std::move(value), false);
  out.node_->op = std::move(op);
  if (!g_grad_enabled) return out;
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Variable& p) { return p.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->backward = std::move(backward);
  out.node_->parents.reserve(parents.size());
  for (const auto& p : parents) out.node_->parents.push_back(p.node_);
  return out;
}

template <typename T>
const Tensor<T>& Variable<T>::grad() const {
  if (!node_->grad) throw ContractError("variable '" + node_->op + "' has no gradient");
  return *node_->grad;
}

template <typename T>
void Variable<T>::zero_grad() {
  if (node_->grad) {
    node_->grad->fill(T{0});
  } else {
    node_->grad = Tensor<T>::zeros(node_->value.shape());
  }
}

template <typename T>
void Variable<T>::accumulate_grad(const Tensor<T>& contribution) const {
  if (!node_->requires_grad) return;
  if (contribution.shape() != node_->value.shape()) {
    throw ShapeError("gradient shape " + shape_to_string(contribution.shape()) +
                     " does not match value shape " + shape_to_string(node_->value.shape()));
  }
  if (!node_->grad) {
    node_->grad = contribution;
    return;
  }
  auto dst = node_->grad->data();
  auto src = contribution.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void Variable<T>::backward() const {
  if (node_->value.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_to_string(node_->value.shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node<T>*> order;
  std::unordered_set<detail::Node<T>*> visited;
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients restart per sweep; only leaves accumulate across calls.
  for (detail::Node<T>* node : order) {
    if (node->backward) node->grad.reset();
  }
  accumulate_grad(Tensor<T>(node_->value.shape(), T{1}));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node<T>* node = *it;
    if (node->backward && node->grad) node->backward(*node->grad);
  }
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Variable<T> add(const Variable<T>& a, const Variable<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return Variable<T>::from_op(
      std::move(out), {a, b},
      [a, b](const Tensor<T>& g) {
        a.accumulate_grad(g);
        b.accumulate_grad(g);
      },
      "add");
}

template <typename T>
Variable<T> sub(const Variable<T>& a, const Variable<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return Variable<T>::from_op(
      std::move(out), {a, b},
      [a, b](const Tensor<T>& g) {
        a.accumulate_grad(g);
        if (b.requires_grad()) {
          Tensor<T> neg = g;
          for (auto& x : neg.data()) x = -x;
          b.accumulate_grad(neg);
        }
      },
      "sub");
}

template <typename T>
Variable<T> mul(const Variable<T>& a, const Variable<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return Variable<T>::from_op(
      std::move(out), {a, b},
      [a, b](const Tensor<T>& g) {
        if (a.requires_grad()) {
          Tensor<T> ga = g;
          auto d = ga.data();
          auto bv = b.value().data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] *= bv[i];
          a.accumulate_grad(ga);
        }
        if (b.requires_grad()) {
          Tensor<T> gb = g;
          auto d = gb.data();
          auto av = a.value().data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] *= av[i];
          b.accumulate_grad(gb);
        }
      },
      "mul");
}

template <typename T>
Variable<T> scale(const Variable<T>& a, T factor) {
  Tensor<T> out = a.value();
  for (auto& x : out.data()) x *= factor;
  return Variable<T>::from_op(
      std::move(out), {a},
      [a, factor](const Tensor<T>& g) {
        Tensor<T> ga = g;
        for (auto& x : ga.data()) x *= factor;
        a.accumulate_grad(ga);
      },
      "scale");
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Variable<T> sum(const Variable<T>& a) {
  T total{0};
  for (T x : a.value().data()) total += x;
  return Variable<T>::from_op(
      Tensor<T>::scalar(total), {a},
      [a](const Tensor<T>& g) { a.accumulate_grad(Tensor<T>(a.shape(), g[0])); }, "sum");
}

template <typename T>
Variable<T> mean(const Variable<T>& a) {
  T total{0};
  for (T x : a.value().data()) total += x;
  const T n = static_cast<T>(a.value().size());
  return Variable<T>::from_op(
      Tensor<T>::scalar(total / n), {a},
      [a, n](const Tensor<T>& g) { a.accumulate_grad(Tensor<T>(a.shape(), g[0] / n)); }, "mean");
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
Variable<T> relu(const Variable<T>& a) {
  Tensor<T> out = a.value();
  if (KinkMonitor::active()) {
    for (const T x : out.data()) KinkMonitor::observe(std::abs(static_cast<double>(x)));
  }
  // NaN passes through so a diverging run reaches the loss check.
  for (auto& x : out.data()) x = x < T{0} ? T{0} : x;
  return Variable<T>::from_op(
      std::move(out), {a},
      [a](const Tensor<T>& g) {
        Tensor<T> ga = g;
        auto d = ga.data();
        auto av = a.value().data();
        for (std::size_t i = 0; i < d.size(); ++i) {
          if (!(av[i] > T{0})) d[i] = T{0};
        }
        a.accumulate_grad(ga);
      },
      "relu");
}

template <typename T>
T stable_sigmoid(T z) noexcept {
  if (z >= T{0}) return T{1} / (T{1} + std::exp(-z));
  const T e = std::exp(z);
  return e / (T{1} + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  Tensor<T> out = a;
  for (auto& x : out.data()) x = stable_sigmoid(x);
  return out;
}

template <typename T>
Variable<T> sigmoid(const Variable<T>& a) {
  Tensor<T> out = sigmoid(a.value());
  Tensor<T> saved = out;
  return Variable<T>::from_op(
      std::move(out), {a},
      [a, saved = std::move(saved)](const Tensor<T>& g) {
        Tensor<T> ga = g;
        auto d = ga.data();
        auto s = saved.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= s[i] * (T{1} - s[i]);
        a.accumulate_grad(ga);
      },
      "sigmoid");
}

// ---------------------------------------------------------------------------
// Channel concat / slice

template <typename T>
Variable<T> concat_channels(const Variable<T>& a, const Variable<T>& b) {
  require_rank4(a.shape(), "concat_channels");
  require_rank4(b.shape(), "concat_channels");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
    throw ShapeError("concat_channels: batch/spatial mismatch " + shape_to_string(sa) + " vs " +
                     shape_to_string(sb));
  }
  const std::size_t n = sa[0], ca = sa[1], cb = sb[1], plane = sa[2] * sa[3];
  Tensor<T> out(Shape{n, ca + cb, sa[2], sa[3]});
  auto o = out.data();
  auto av = a.value().data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(av.begin() + i * ca * plane, ca * plane, o.begin() + i * (ca + cb) * plane);
    std::copy_n(bv.begin() + i * cb * plane, cb * plane, o.begin() + (i * (ca + cb) + ca) * plane);
  }
  return Variable<T>::from_op(
      std::move(out), {a, b},
      [a, b, n, ca, cb, plane](const Tensor<T>& g) {
        auto gv = g.data();
        if (a.requires_grad()) {
          Tensor<T> ga(a.shape());
          for (std::size_t i = 0; i < n; ++i) {
            std::copy_n(gv.begin() + i * (ca + cb) * plane, ca * plane,
                        ga.data().begin() + i * ca * plane);
          }
          a.accumulate_grad(ga);
        }
        if (b.requires_grad()) {
          Tensor<T> gb(b.shape());
          for (std::size_t i = 0; i < n; ++i) {
            std::copy_n(gv.begin() + (i * (ca + cb) + ca) * plane, cb * plane,
                        gb.data().begin() + i * cb * plane);
          }
          b.accumulate_grad(gb);
        }
      },
      "concat_channels");
}

template <typename T>
Variable<T> slice_channels(const Variable<T>& a, std::size_t begin, std::size_t end) {
  require_rank4(a.shape(), "slice_channels");
  const Shape& s = a.shape();
  if (begin >= end || end > s[1]) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + shape_to_string(s));
  }
  const std::size_t n = s[0], c = s[1], k = end - begin, plane = s[2] * s[3];
  Tensor<T> out(Shape{n, k, s[2], s[3]});
  auto av = a.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(av.begin() + (i * c + begin) * plane, k * plane, out.data().begin() + i * k * plane);
  }
  return Variable<T>::from_op(
      std::move(out), {a},
      [a, n, c, k, begin, plane](const Tensor<T>& g) {
        Tensor<T> ga(a.shape());
        for (std::size_t i = 0; i < n; ++i) {
          std::copy_n(g.data().begin() + i * k * plane, k * plane,
                      ga.data().begin() + (i * c + begin) * plane);
        }
        a.accumulate_grad(ga);
      },
      "slice_channels");
}

#define ECHOSEG_INSTANTIATE(T)                                                        \
  template class Variable<T>;                                                         \
  template Variable<T> add(const Variable<T>&, const Variable<T>&);                   \
  template Variable<T> sub(const Variable<T>&, const Variable<T>&);                   \
  template Variable<T> mul(const Variable<T>&, const Variable<T>&);                   \
  template Variable<T> scale(const Variable<T>&, T);                                  \
  template Variable<T> sum(const Variable<T>&);                                       \
  template Variable<T> mean(const Variable<T>&);                                      \
  template Variable<T> relu(const Variable<T>&);                                      \
  template Variable<T> sigmoid(const Variable<T>&);                                   \
  template Tensor<T> sigmoid(const Tensor<T>&);                                       \
  template T stable_sigmoid(T) noexcept;                                              \
  template Variable<T> concat_channels(const Variable<T>&, const Variable<T>&);       \
  template Variable<T> slice_channels(const Variable<T>&, std::size_t, std::size_t);

ECHOSEG_INSTANTIATE(float)
ECHOSEG_INSTANTIATE(double)

#undef ECHOSEG_INSTANTIATE

}  // namespace echoseg
