#include "echoseg/loss.hpp"

#include <cmath>
#include <map>

namespace echoseg {

template <typename T>
Variable<T> bce_with_logits(const Variable<T>& logits, const Tensor<T>& targets) {
  if (logits.shape() != targets.shape()) {
    throw ShapeError("bce_with_logits: logits " + shape_to_string(logits.shape()) + " vs targets " +
                     shape_to_string(targets.shape()));
  }
  for (T y : targets.data()) {
    if (y != T{0} && y != T{1}) throw ValidationError("bce_with_logits: targets must be 0 or 1");
  }
  const auto z = logits.value().data();
  const auto y = targets.data();
  // Accumulate in double so large single-precision batches stay accurate.
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double zi = z[i];
    total += std::max(zi, 0.0) - zi * static_cast<double>(y[i]) + std::log1p(std::exp(-std::abs(zi)));
  }
  const T n = static_cast<T>(z.size());
  return Variable<T>::from_op(
      Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(z.size()))), {logits},
      [logits, targets, n](const Tensor<T>& g) {
        Tensor<T> grad(logits.shape());
        const auto z = logits.value().data();
        const auto y = targets.data();
        const T scale = g[0] / n;
        for (std::size_t i = 0; i < z.size(); ++i) grad[i] = (stable_sigmoid(z[i]) - y[i]) * scale;
        logits.accumulate_grad(grad);
      },
      "bce_with_logits");
}

template <typename T>
Variable<T> mse_loss(const Variable<T>& prediction, const Tensor<T>& target) {
  if (prediction.shape() != target.shape()) {
    throw ShapeError("mse_loss: prediction " + shape_to_string(prediction.shape()) + " vs target " +
                     shape_to_string(target.shape()));
  }
  const auto p = prediction.value().data();
  const auto t = target.data();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
    total += d * d;
  }
  const T n = static_cast<T>(p.size());
  return Variable<T>::from_op(
      Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(p.size()))), {prediction},
      [prediction, target, n](const Tensor<T>& g) {
        Tensor<T> grad(prediction.shape());
        const auto p = prediction.value().data();
        const auto t = target.data();
        const T scale = T{2} * g[0] / n;
        for (std::size_t i = 0; i < p.size(); ++i) grad[i] = (p[i] - t[i]) * scale;
        prediction.accumulate_grad(grad);
      },
      "mse_loss");
}

template <typename T>
Variable<T> matryoshka_loss(const std::vector<Variable<T>>& reconstructions,
                            const std::vector<Tensor<T>>& targets) {
  if (reconstructions.size() != targets.size()) {
    throw ContractError("matryoshka_loss: " + std::to_string(reconstructions.size()) +
                        " reconstructions but " + std::to_string(targets.size()) + " targets");
  }
  if (reconstructions.empty()) return Variable<T>(Tensor<T>::scalar(T{0}));
  Variable<T> total = mse_loss(reconstructions[0], targets[0]);
  for (std::size_t i = 1; i < reconstructions.size(); ++i) {
    total = add(total, mse_loss(reconstructions[i], targets[i]));
  }
  return total;
}

template <typename T>
std::vector<Tensor<T>> matryoshka_targets(const Tensor<T>& images,
                                          const std::vector<AuxReconstruction<T>>& aux) {
  std::map<std::size_t, Tensor<T>> by_stage;
  std::vector<Tensor<T>> targets;
  targets.reserve(aux.size());
  for (const auto& a : aux) {
    auto it = by_stage.find(a.stage);
    if (it == by_stage.end()) {
      Tensor<T> pooled = images;
      for (std::size_t s = 0; s <= a.stage; ++s) pooled = avg_pool2x2(pooled);
      it = by_stage.emplace(a.stage, std::move(pooled)).first;
    }
    targets.push_back(it->second);
  }
  return targets;
}

template <typename T>
TrainingLoss<T> training_loss(const ForwardOutput<T>& output, const Tensor<T>& images,
                              const Tensor<T>& masks, T lambda) {
  Variable<T> bce = bce_with_logits(output.logits, masks);
  TrainingLoss<T> loss;
  loss.breakdown.segmentation_bce = bce.value()[0];
  if (output.aux_reconstructions.empty()) {
    loss.total = bce;
    loss.breakdown.total = loss.breakdown.segmentation_bce;
    return loss;
  }
  std::vector<Variable<T>> recon;
  recon.reserve(output.aux_reconstructions.size());
  for (const auto& a : output.aux_reconstructions) recon.push_back(a.value);
  Variable<T> mse = matryoshka_loss(recon, matryoshka_targets(images, output.aux_reconstructions));
  loss.breakdown.matryoshka_mse = mse.value()[0];
  // Always routed through the graph so that lambda = 0 still yields
  // (zero) gradients for the reconstruction heads.
  loss.total = add(bce, scale(mse, lambda));
  loss.breakdown.total = loss.total.value()[0];
  return loss;
}

#define ECHOSEG_INSTANTIATE(T)                                                                 \
  template Variable<T> bce_with_logits(const Variable<T>&, const Tensor<T>&);                  \
  template Variable<T> mse_loss(const Variable<T>&, const Tensor<T>&);                         \
  template Variable<T> matryoshka_loss(const std::vector<Variable<T>>&,                        \
                                       const std::vector<Tensor<T>>&);                         \
  template std::vector<Tensor<T>> matryoshka_targets(const Tensor<T>&,                         \
                                                     const std::vector<AuxReconstruction<T>>&); \
  template TrainingLoss<T> training_loss(const ForwardOutput<T>&, const Tensor<T>&,            \
                                         const Tensor<T>&, T);

ECHOSEG_INSTANTIATE(float)
ECHOSEG_INSTANTIATE(double)

#undef ECHOSEG_INSTANTIATE

}  // namespace echoseg
