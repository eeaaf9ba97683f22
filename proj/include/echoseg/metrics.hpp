#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "echoseg/tensor.hpp"

namespace echoseg {

/// Binary H x W mask; pixels are 0 or 1.
struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  Mask() = default;
  Mask(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), pixels(h * w, fill) {}

  std::uint8_t operator()(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
  std::uint8_t& operator()(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  std::size_t count() const;

  bool operator==(const Mask&) const = default;
};

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
};

struct MetricSummary {
  double mean_iou = 0.0;
  double mean_dice = 0.0;
  double mean_pixel_accuracy = 0.0;
  std::size_t n_images = 0;
};

/// 1 where prob > threshold (strict). Uses the last two dims as H x W; all
/// leading dims must be 1.
template <typename T>
Mask binarize(const Tensor<T>& probs, double threshold = 0.5);

/// Mask from a {0,1}-valued tensor (ground truth), H x W from the last two dims.
template <typename T>
Mask mask_from_tensor(const Tensor<T>& values);

ConfusionCounts confusion(const Mask& pred, const Mask& gt);

// Both-empty masks score 1 for IoU and Dice.
double iou(const Mask& pred, const Mask& gt);
double dice(const Mask& pred, const Mask& gt);
double pixel_accuracy(const Mask& pred, const Mask& gt);

double iou(const ConfusionCounts& c);
double dice(const ConfusionCounts& c);
double pixel_accuracy(const ConfusionCounts& c);

/// Per-image metrics, then arithmetic mean over images.
MetricSummary evaluate_dataset(std::span<const Mask> preds, std::span<const Mask> gts);

}  // namespace echoseg
