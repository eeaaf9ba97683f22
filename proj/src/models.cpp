#include "echoseg/models.hpp"

namespace echoseg {

std::string to_string(ModelKind kind) { return kind == ModelKind::vanilla ? "vanilla" : "matae"; }

ModelKind parse_model_kind(const std::string& name) {
  if (name == "vanilla") return ModelKind::vanilla;
  if (name == "matae") return ModelKind::matae;
  throw ConfigError("unknown model kind '" + name + "' (expected vanilla or matae)");
}

void UNetConfig::validate() const {
  if (depth < 1) throw ConfigError("depth must be >= 1");
  if (depth > 16) throw ConfigError("depth must be <= 16");
  if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
  if (in_channels < 1 || out_channels < 1) throw ConfigError("channel counts must be >= 1");
}

template <typename T>
UNet<T>::UNet(ModelKind kind, const UNetConfig& config, std::uint64_t seed)
    : kind_(kind), config_(config), seed_(seed) {
  config_.validate();
  if (kind_ == ModelKind::matae && prefix_channels(config_.base_channels, 4) < 1) {
    throw ConfigError("matae requires base_channels >= 4 (got " +
                      std::to_string(config_.base_channels) + ")");
  }
  Rng rng(seed);
  const std::size_t depth = config_.depth;
  std::size_t in = config_.in_channels;
  for (std::size_t s = 0; s < depth; ++s) {
    encoder_.push_back(ConvBlock<T>::create(in, config_.stage_channels(s), rng));
    in = config_.stage_channels(s);
  }
  bottleneck_ = ConvBlock<T>::create(in, config_.stage_channels(depth), rng);
  for (std::size_t j = 0; j < depth; ++j) {
    const std::size_t c = config_.stage_channels(depth - 1 - j);
    up_.push_back(TransposeConv2D<T>::create(2 * c, c, rng));
    decoder_.push_back(ConvBlock<T>::create(2 * c, c, rng));
  }
  head_ = Conv2D<T>::create(config_.stage_channels(0), config_.out_channels, 1, 1, 0, rng);

  if (kind_ == ModelKind::matae) {
    for (std::size_t s = 0; s < depth; ++s) {
      for (std::size_t denom : kPrefixDenominators) {
        const std::size_t c = prefix_channels(config_.stage_channels(s), denom);
        heads_.push_back({s, denom, c, Conv2D<T>::create(c, config_.in_channels, 1, 1, 0, rng)});
      }
    }
  }
}

template <typename T>
void UNet<T>::check_input(const Shape& shape) const {
  if (shape.size() != 4) {
    throw ShapeError("model input must be NCHW, got " + shape_to_string(shape));
  }
  if (shape[1] != config_.in_channels) {
    throw ShapeError("model expects " + std::to_string(config_.in_channels) +
                     " input channels, got " + shape_to_string(shape));
  }
  const std::size_t div = config_.size_divisor();
  if (shape[2] % div != 0 || shape[3] % div != 0) {
    throw ShapeError("input spatial dims " + std::to_string(shape[2]) + "x" +
                     std::to_string(shape[3]) + " must be divisible by " + std::to_string(div) +
                     " (2^depth)");
  }
}

template <typename T>
std::vector<Variable<T>> UNet<T>::encode_pooled(const Tensor<T>& x) const {
  check_input(x.shape());
  std::vector<Variable<T>> pooled;
  Variable<T> h(x);
  for (const auto& block : encoder_) {
    h = max_pool2x2(block(h));
    pooled.push_back(h);
  }
  return pooled;
}

template <typename T>
ForwardOutput<T> UNet<T>::forward(const Tensor<T>& x) const {
  check_input(x.shape());
  const std::size_t depth = config_.depth;
  std::vector<Variable<T>> skips;
  std::vector<Variable<T>> pooled;
  skips.reserve(depth);
  pooled.reserve(depth);

  Variable<T> h(x);
  for (const auto& block : encoder_) {
    Variable<T> features = block(h);
    skips.push_back(features);
    h = max_pool2x2(features);
    pooled.push_back(h);
  }
  h = bottleneck_(h);
  for (std::size_t j = 0; j < depth; ++j) {
    h = decoder_[j](concat_channels(up_[j](h), skips[depth - 1 - j]));
  }

  ForwardOutput<T> out;
  out.logits = head_(h);
  for (const auto& head : heads_) {
    const Variable<T>& stage = pooled[head.stage];
    Variable<T> prefix = head.channels == stage.shape()[1]
                             ? stage
                             : slice_channels(stage, 0, head.channels);
    out.aux_reconstructions.push_back({head.stage, head.denominator, head.conv(prefix)});
  }
  return out;
}

template <typename T>
std::vector<NamedParameter<T>> UNet<T>::parameters() const {
  std::vector<NamedParameter<T>> params;
  for (std::size_t s = 0; s < encoder_.size(); ++s) {
    encoder_[s].collect_parameters("enc" + std::to_string(s), params);
  }
  bottleneck_.collect_parameters("bottleneck", params);
  for (std::size_t j = 0; j < up_.size(); ++j) {
    up_[j].collect_parameters("dec" + std::to_string(j) + ".up", params);
    decoder_[j].collect_parameters("dec" + std::to_string(j) + ".block", params);
  }
  head_.collect_parameters("head", params);
  for (const auto& head : heads_) {
    head.conv.collect_parameters(
        "recon.s" + std::to_string(head.stage) + ".f" + std::to_string(head.denominator), params);
  }
  return params;
}

template <typename T>
std::size_t UNet<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.variable.value().size();
  return total;
}

template <typename T>
UNet<T> build_vanilla_unet(const UNetConfig& config, std::uint64_t seed) {
  return UNet<T>(ModelKind::vanilla, config, seed);
}

template <typename T>
UNet<T> build_matae_unet(const UNetConfig& config, std::uint64_t seed) {
  return UNet<T>(ModelKind::matae, config, seed);
}

template <typename T>
UNet<T> build_model(ModelKind kind, const UNetConfig& config, std::uint64_t seed) {
  return UNet<T>(kind, config, seed);
}

template class UNet<float>;
template class UNet<double>;
template UNet<float> build_vanilla_unet(const UNetConfig&, std::uint64_t);
template UNet<double> build_vanilla_unet(const UNetConfig&, std::uint64_t);
template UNet<float> build_matae_unet(const UNetConfig&, std::uint64_t);
template UNet<double> build_matae_unet(const UNetConfig&, std::uint64_t);
template UNet<float> build_model(ModelKind, const UNetConfig&, std::uint64_t);
template UNet<double> build_model(ModelKind, const UNetConfig&, std::uint64_t);

}  // namespace echoseg
