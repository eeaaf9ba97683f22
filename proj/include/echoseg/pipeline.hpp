#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "echoseg/dataset.hpp"
#include "echoseg/loss.hpp"
#include "echoseg/metrics.hpp"
#include "echoseg/optim.hpp"
#include "echoseg/serialization.hpp"

namespace echoseg {

struct TrainConfig {
  ModelKind kind = ModelKind::vanilla;
  UNetConfig model;
  std::size_t epochs = 1;
  std::size_t batch_size = 4;
  double lr = 1e-3;
  double lambda = 0.1;  // Matryoshka weight, MatAE only
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;        // 0 disables periodic test evaluation
  std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::filesystem::path checkpoint_path;
  double threshold = 0.5;

  void validate() const;
  std::map<std::string, std::string> to_metadata() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  LossBreakdown mean_loss;
  std::optional<MetricSummary> test_metrics;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

/// Owns a model and its Adam state; runs seeded epochs. The sample order of
/// epoch e depends only on (seed, e), so a resumed run replays exactly.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);
  /// Continues from a checkpoint: model, Adam moments and epoch counter.
  Trainer(TrainConfig config, const Checkpoint& checkpoint);

  EpochRecord run_epoch(const std::vector<Sample>& train_set, const std::vector<Sample>& test_set);

  /// Runs epochs until config.epochs have completed. `on_epoch` sees each record.
  TrainHistory train(const std::vector<Sample>& train_set, const std::vector<Sample>& test_set,
                     const std::function<void(const EpochRecord&)>& on_epoch = {});

  Checkpoint checkpoint() const;
  const UNet<float>& model() const noexcept { return model_; }
  const TrainConfig& config() const noexcept { return config_; }
  std::size_t completed_epochs() const noexcept { return epoch_; }

 private:
  TrainConfig config_;
  UNet<float> model_;
  Adam<float> optimizer_;
  std::size_t epoch_ = 0;
};

struct TrainResult {
  TrainHistory history;
  Checkpoint checkpoint;
};

/// Fresh model, full run; writes config.checkpoint_path at the end when set.
TrainResult train(const TrainConfig& config, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& test_set,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Maps an image batch (B,1,H,W) to logits (B,1,H,W).
using LogitsFn = std::function<Tensor<float>(const Tensor<float>&)>;

LogitsFn logits_fn(const UNet<float>& model);

/// sigmoid -> binarize(threshold) per image.
std::vector<Mask> predict_masks(const LogitsFn& model, const std::vector<Tensor<float>>& images,
                                double threshold = 0.5, std::size_t batch_size = 4);

MetricSummary evaluate(const LogitsFn& model, const std::vector<Sample>& dataset,
                       double threshold = 0.5, std::size_t batch_size = 4);
MetricSummary evaluate(const UNet<float>& model, const std::vector<Sample>& dataset,
                       double threshold = 0.5, std::size_t batch_size = 4);

struct BenchReport {
  double mean_inference_seconds = 0.0;  // per frame
  double peak_resident_memory_mb = 0.0;
  std::size_t n_frames = 0;
  std::size_t batch_size = 1;
  std::size_t repetitions = 0;
};

/// One untimed warm-up pass, then `repetitions` timed passes over the frames.
/// Only forward calls are inside the timed region.
BenchReport benchmark(const LogitsFn& model, const std::vector<Sample>& dataset,
                      std::size_t repetitions, std::size_t batch_size = 1);

/// Peak resident set size of this process in MB (0 if unavailable).
double peak_resident_memory_mb();

/// Grayscale frame replicated to RGB with the mask boundary painted red.
/// Boundary pixels are mask pixels with a 4-neighbour outside the mask or
/// the image.
RgbImage render_overlay(const GrayImage& frame, const Mask& mask);

}  // namespace echoseg
