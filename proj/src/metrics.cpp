#include "echoseg/metrics.hpp"

#include <algorithm>

namespace echoseg {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

namespace {

template <typename T>
std::pair<std::size_t, std::size_t> plane_dims(const Tensor<T>& t, const char* what) {
  const Shape& s = t.shape();
  if (s.size() < 2) throw ShapeError(std::string(what) + ": need at least 2 dims, got " + shape_to_string(s));
  for (std::size_t i = 0; i + 2 < s.size(); ++i) {
    if (s[i] != 1) {
      throw ShapeError(std::string(what) + ": leading dims must be 1, got " + shape_to_string(s));
    }
  }
  return {s[s.size() - 2], s[s.size() - 1]};
}

void require_same(const Mask& a, const Mask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw ShapeError("mask shape mismatch " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                     " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
  }
}

}  // namespace

template <typename T>
Mask binarize(const Tensor<T>& probs, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ValidationError("binarize: threshold must lie in [0,1]");
  }
  const auto [h, w] = plane_dims(probs, "binarize");
  Mask out(h, w);
  const auto v = probs.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= T{0} && v[i] <= T{1})) throw ValidationError("binarize: probabilities must lie in [0,1]");
    out.pixels[i] = static_cast<double>(v[i]) > threshold ? 1 : 0;
  }
  return out;
}

template <typename T>
Mask mask_from_tensor(const Tensor<T>& values) {
  const auto [h, w] = plane_dims(values, "mask_from_tensor");
  Mask out(h, w);
  const auto v = values.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != T{0} && v[i] != T{1}) throw ValidationError("mask tensor must be binary");
    out.pixels[i] = v[i] == T{1} ? 1 : 0;
  }
  return out;
}

ConfusionCounts confusion(const Mask& pred, const Mask& gt) {
  require_same(pred, gt);
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    const bool p = pred.pixels[i] != 0;
    const bool g = gt.pixels[i] != 0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double iou(const ConfusionCounts& c) {
  const std::size_t uni = c.tp + c.fp + c.fn;
  return uni == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(uni);
}

double dice(const ConfusionCounts& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 1.0 : static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

double pixel_accuracy(const ConfusionCounts& c) {
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double iou(const Mask& pred, const Mask& gt) { return iou(confusion(pred, gt)); }
double dice(const Mask& pred, const Mask& gt) { return dice(confusion(pred, gt)); }
double pixel_accuracy(const Mask& pred, const Mask& gt) { return pixel_accuracy(confusion(pred, gt)); }

MetricSummary evaluate_dataset(std::span<const Mask> preds, std::span<const Mask> gts) {
  if (preds.empty()) throw ValidationError("evaluate_dataset: no images");
  if (preds.size() != gts.size()) {
    throw ValidationError("evaluate_dataset: " + std::to_string(preds.size()) + " predictions for " +
                          std::to_string(gts.size()) + " ground truths");
  }
  MetricSummary s;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const ConfusionCounts c = confusion(preds[i], gts[i]);
    s.mean_iou += iou(c);
    s.mean_dice += dice(c);
    s.mean_pixel_accuracy += pixel_accuracy(c);
  }
  const auto n = static_cast<double>(preds.size());
  s.mean_iou /= n;
  s.mean_dice /= n;
  s.mean_pixel_accuracy /= n;
  s.n_images = preds.size();
  return s;
}

template Mask binarize(const Tensor<float>&, double);
template Mask binarize(const Tensor<double>&, double);
template Mask mask_from_tensor(const Tensor<float>&);
template Mask mask_from_tensor(const Tensor<double>&);

}  // namespace echoseg
