#pragma once

#include <vector>

#include "echoseg/models.hpp"

namespace echoseg {

struct LossBreakdown {
  double segmentation_bce = 0.0;
  double matryoshka_mse = 0.0;
  double total = 0.0;  // segmentation_bce + lambda * matryoshka_mse
};

/// Mean of max(z,0) - z*y + log(1 + exp(-|z|)); targets must be 0 or 1.
template <typename T>
Variable<T> bce_with_logits(const Variable<T>& logits, const Tensor<T>& targets);

/// mean((prediction - target)^2)
template <typename T>
Variable<T> mse_loss(const Variable<T>& prediction, const Tensor<T>& target);

/// Sum of per-pair MSE means; the lists are aligned by (stage, fraction).
template <typename T>
Variable<T> matryoshka_loss(const std::vector<Variable<T>>& reconstructions,
                            const std::vector<Tensor<T>>& targets);

/// Input image average-pooled to the resolution of each reconstruction head,
/// in the same order as ForwardOutput::aux_reconstructions.
template <typename T>
std::vector<Tensor<T>> matryoshka_targets(const Tensor<T>& images,
                                          const std::vector<AuxReconstruction<T>>& aux);

template <typename T>
struct TrainingLoss {
  Variable<T> total;
  LossBreakdown breakdown;
};

/// BCE on the logits plus lambda times the Matryoshka reconstruction loss.
/// With no auxiliary outputs (vanilla) the reconstruction term is zero.
template <typename T>
TrainingLoss<T> training_loss(const ForwardOutput<T>& output, const Tensor<T>& images,
                              const Tensor<T>& masks, T lambda);

}  // namespace echoseg
