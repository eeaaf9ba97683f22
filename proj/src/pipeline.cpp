#include "echoseg/pipeline.hpp"

#include <sys/resource.h>

#include <chrono>
#include <cmath>
#include <sstream>

#include "echoseg/rng.hpp"

namespace echoseg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_real(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0,1]");
}

std::map<std::string, std::string> TrainConfig::to_metadata() const {
  return {{"train.epochs", std::to_string(epochs)},
          {"train.batch_size", std::to_string(batch_size)},
          {"train.lr", format_real(lr)},
          {"train.lambda", format_real(lambda)},
          {"train.seed", std::to_string(seed)}};
}

Trainer::Trainer(TrainConfig config)
    : config_(std::move(config)),
      model_(config_.kind, config_.model, config_.seed),
      optimizer_(model_.parameters(), AdamOptions{config_.lr}) {
  config_.validate();
}

Trainer::Trainer(TrainConfig config, const Checkpoint& checkpoint)
    : config_(std::move(config)),
      model_(restore_model(checkpoint)),
      optimizer_(model_.parameters(), AdamOptions{config_.lr}),
      epoch_(checkpoint.epoch) {
  // The checkpoint's own architecture is authoritative.
  config_.kind = checkpoint.kind;
  config_.model = checkpoint.config;
  config_.validate();
  if (checkpoint.adam) {
    AdamState<float> state = *checkpoint.adam;
    state.options = AdamOptions{config_.lr};
    optimizer_.load_state(std::move(state));
  }
}

EpochRecord Trainer::run_epoch(const std::vector<Sample>& train_set, const std::vector<Sample>& test_set) {
  if (train_set.empty()) throw ValidationError("training set is empty");
  const auto start = Clock::now();
  const std::size_t epoch = epoch_ + 1;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(config_.seed, epoch));
  shuffle(order, rng);

  EpochRecord record;
  record.epoch = epoch;
  const float lambda = static_cast<float>(config_.lambda);
  std::size_t batch_index = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size, ++batch_index) {
    const std::size_t end = std::min(order.size(), begin + config_.batch_size);
    const std::vector<std::size_t> indices(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
    const auto [images, masks] = stack_batch(train_set, indices);

    const ForwardOutput<float> out = model_.forward(images);
    const TrainingLoss<float> loss = training_loss(out, images, masks, lambda);
    if (!std::isfinite(loss.breakdown.total)) {
      throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index));
    }
    optimizer_.zero_grad();
    loss.total.backward();
    optimizer_.step();

    const double weight = static_cast<double>(indices.size());
    record.mean_loss.segmentation_bce += weight * loss.breakdown.segmentation_bce;
    record.mean_loss.matryoshka_mse += weight * loss.breakdown.matryoshka_mse;
    record.mean_loss.total += weight * loss.breakdown.total;
  }
  const double n = static_cast<double>(train_set.size());
  record.mean_loss.segmentation_bce /= n;
  record.mean_loss.matryoshka_mse /= n;
  record.mean_loss.total /= n;
  epoch_ = epoch;

  if (config_.eval_every > 0 && epoch % config_.eval_every == 0 && !test_set.empty()) {
    record.test_metrics = evaluate(model_, test_set, config_.threshold, config_.batch_size);
  }
  if (config_.checkpoint_every > 0 && epoch % config_.checkpoint_every == 0 &&
      !config_.checkpoint_path.empty()) {
    save_checkpoint(config_.checkpoint_path, checkpoint());
  }
  record.seconds = seconds_since(start);
  return record;
}

TrainHistory Trainer::train(const std::vector<Sample>& train_set, const std::vector<Sample>& test_set,
                            const std::function<void(const EpochRecord&)>& on_epoch) {
  if (train_set.empty()) throw ValidationError("training set is empty");
  const std::size_t divisor = config_.model.size_divisor();
  for (const auto& s : train_set) {
    if (s.height() % divisor != 0 || s.width() % divisor != 0) {
      throw ShapeError("sample '" + s.id + "' is " + std::to_string(s.height()) + "x" +
                       std::to_string(s.width()) + "; dims must be divisible by " + std::to_string(divisor));
    }
  }
  TrainHistory history;
  while (epoch_ < config_.epochs) {
    history.epochs.push_back(run_epoch(train_set, test_set));
    if (on_epoch) on_epoch(history.epochs.back());
  }
  return history;
}

Checkpoint Trainer::checkpoint() const {
  return make_checkpoint(model_, &optimizer_, epoch_, config_.to_metadata());
}

TrainResult train(const TrainConfig& config, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& test_set,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  Trainer trainer(config);
  TrainResult result;
  result.history = trainer.train(train_set, test_set, on_epoch);
  result.checkpoint = trainer.checkpoint();
  if (!config.checkpoint_path.empty()) save_checkpoint(config.checkpoint_path, result.checkpoint);
  return result;
}

// ---------------------------------------------------------------------------
// Inference

LogitsFn logits_fn(const UNet<float>& model) {
  return [model](const Tensor<float>& batch) {
    NoGradGuard no_grad;
    return model.forward(batch).logits.value();
  };
}

std::vector<Mask> predict_masks(const LogitsFn& model, const std::vector<Tensor<float>>& images,
                                double threshold, std::size_t batch_size) {
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  std::vector<Mask> masks;
  masks.reserve(images.size());
  std::size_t begin = 0;
  while (begin < images.size()) {
    // Batch consecutive images of identical shape.
    std::size_t end = begin + 1;
    while (end < images.size() && end - begin < batch_size && images[end].shape() == images[begin].shape()) ++end;
    const Shape& s = images[begin].shape();
    if (s.size() != 3) throw ShapeError("predict: images must be (C,H,W), got " + shape_to_string(s));
    const std::size_t plane = images[begin].size();
    Tensor<float> batch(Shape{end - begin, s[0], s[1], s[2]});
    for (std::size_t i = begin; i < end; ++i) {
      std::copy(images[i].data().begin(), images[i].data().end(), batch.data().begin() + (i - begin) * plane);
    }
    const Tensor<float> probs = sigmoid(model(batch));
    const std::size_t out_plane = s[1] * s[2];
    if (probs.size() != (end - begin) * out_plane) {
      throw ShapeError("predict: model output " + shape_to_string(probs.shape()) + " is not one plane per image");
    }
    for (std::size_t i = 0; i < end - begin; ++i) {
      std::vector<float> one(probs.data().begin() + i * out_plane, probs.data().begin() + (i + 1) * out_plane);
      masks.push_back(binarize(Tensor<float>(Shape{s[1], s[2]}, std::move(one)), threshold));
    }
    begin = end;
  }
  return masks;
}

MetricSummary evaluate(const LogitsFn& model, const std::vector<Sample>& dataset, double threshold,
                       std::size_t batch_size) {
  if (dataset.empty()) throw ValidationError("evaluate: dataset is empty");
  std::vector<Tensor<float>> images;
  std::vector<Mask> truth;
  images.reserve(dataset.size());
  truth.reserve(dataset.size());
  for (const auto& s : dataset) {
    images.push_back(s.image);
    truth.push_back(mask_from_tensor(s.mask));
  }
  const std::vector<Mask> preds = predict_masks(model, images, threshold, batch_size);
  return evaluate_dataset(preds, truth);
}

MetricSummary evaluate(const UNet<float>& model, const std::vector<Sample>& dataset, double threshold,
                       std::size_t batch_size) {
  return evaluate(logits_fn(model), dataset, threshold, batch_size);
}

double peak_resident_memory_mb() {
  rusage usage{};
  if (getrusage(RUSAGE_SELF, &usage) != 0) return 0.0;
  return static_cast<double>(usage.ru_maxrss) / 1024.0;  // Linux reports KiB
}

BenchReport benchmark(const LogitsFn& model, const std::vector<Sample>& dataset, std::size_t repetitions,
                      std::size_t batch_size) {
  if (dataset.empty()) throw ValidationError("benchmark: dataset is empty");
  if (repetitions < 3) throw ValidationError("benchmark: repetitions must be >= 3");
  if (batch_size < 1) throw ValidationError("benchmark: batch_size must be >= 1");

  std::vector<Tensor<float>> batches;
  for (std::size_t begin = 0; begin < dataset.size(); begin += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < std::min(dataset.size(), begin + batch_size); ++i) idx.push_back(i);
    batches.push_back(stack_batch(dataset, idx).first);
  }
  for (const auto& b : batches) (void)model(b);  // warm-up

  double elapsed = 0.0;
  for (std::size_t r = 0; r < repetitions; ++r) {
    for (const auto& b : batches) {
      const auto start = Clock::now();
      (void)model(b);
      elapsed += seconds_since(start);
    }
  }
  BenchReport report;
  report.n_frames = dataset.size();
  report.batch_size = batch_size;
  report.repetitions = repetitions;
  report.mean_inference_seconds = elapsed / static_cast<double>(repetitions * dataset.size());
  report.peak_resident_memory_mb = peak_resident_memory_mb();
  return report;
}

RgbImage render_overlay(const GrayImage& frame, const Mask& mask) {
  if (frame.width != mask.width || frame.height != mask.height) {
    throw ShapeError("overlay: frame and mask sizes differ");
  }
  RgbImage out{frame.width, frame.height, std::vector<std::uint8_t>(3 * frame.pixels.size())};
  const std::size_t h = frame.height, w = frame.width;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      bool boundary = false;
      if (mask.pixels[i]) {
        boundary = y == 0 || x == 0 || y + 1 == h || x + 1 == w || !mask(y - 1, x) || !mask(y + 1, x) ||
                   !mask(y, x - 1) || !mask(y, x + 1);
      }
      if (boundary) {
        out.pixels[3 * i] = 255;
        out.pixels[3 * i + 1] = 0;
        out.pixels[3 * i + 2] = 0;
      } else {
        out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] = frame.pixels[i];
      }
    }
  }
  return out;
}

}  // namespace echoseg
