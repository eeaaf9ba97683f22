#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "echoseg/layers.hpp"

namespace echoseg {

enum class ModelKind { vanilla, matae };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct UNetConfig {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t depth = 4;  // pooling stages
  std::size_t base_channels = 16;

  void validate() const;
  /// base_channels * 2^stage; stage == depth is the bottleneck.
  std::size_t stage_channels(std::size_t stage) const { return base_channels << stage; }
  /// Required divisor of input height and width.
  std::size_t size_divisor() const { return std::size_t{1} << depth; }

  bool operator==(const UNetConfig&) const = default;
};

/// Nested channel prefixes used by the Matryoshka reconstruction heads.
inline constexpr std::array<std::size_t, 3> kPrefixDenominators{4, 2, 1};

/// floor(channels / denominator); callers guarantee it is at least 1.
constexpr std::size_t prefix_channels(std::size_t channels, std::size_t denominator) {
  return channels / denominator;
}

template <typename T>
struct AuxReconstruction {
  std::size_t stage;
  std::size_t denominator;  // prefix fraction is 1/denominator
  Variable<T> value;        // (N, in_channels, H / 2^(stage+1), W / 2^(stage+1))
};

template <typename T>
struct ForwardOutput {
  Variable<T> logits;  // raw scores (N, out_channels, H, W)
  std::vector<AuxReconstruction<T>> aux_reconstructions;
};

/// U-Net with `depth` encoder stages (ConvBlock + 2x2 max pool), a bottleneck
/// ConvBlock and a mirrored decoder (transpose conv 2C->C, concat with the
/// C-channel skip, ConvBlock 2C->C), ending in a 1x1 conv head.
///
/// The MatAE variant adds, for every encoder stage and every prefix fraction
/// in {1/4, 1/2, 1}, a 1x1 conv that reconstructs the average-pooled input
/// image from the leading channels of that stage's pooled feature map.
/// Skip connections always carry the full stage feature map.
template <typename T>
class UNet {
 public:
  struct Head {
    std::size_t stage;
    std::size_t denominator;
    std::size_t channels;
    Conv2D<T> conv;
  };

  UNet(ModelKind kind, const UNetConfig& config, std::uint64_t seed);

  ModelKind kind() const noexcept { return kind_; }
  const UNetConfig& config() const noexcept { return config_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<Head>& reconstruction_heads() const noexcept { return heads_; }

  /// x is (N, in_channels, H, W) with H, W divisible by 2^depth.
  ForwardOutput<T> forward(const Tensor<T>& x) const;

  /// Stable, deterministic order and names (enc0.conv1.weight, ...).
  std::vector<NamedParameter<T>> parameters() const;
  std::size_t parameter_count() const;

  /// Encoder feature maps after pooling, one per stage (exposed for tests).
  std::vector<Variable<T>> encode_pooled(const Tensor<T>& x) const;

 private:
  void check_input(const Shape& shape) const;

  ModelKind kind_;
  UNetConfig config_;
  std::uint64_t seed_;
  std::vector<ConvBlock<T>> encoder_;
  ConvBlock<T> bottleneck_;
  std::vector<TransposeConv2D<T>> up_;      // index j: decoder stage j (deepest first)
  std::vector<ConvBlock<T>> decoder_;
  Conv2D<T> head_;
  std::vector<Head> heads_;
};

template <typename T>
UNet<T> build_vanilla_unet(const UNetConfig& config, std::uint64_t seed);
template <typename T>
UNet<T> build_matae_unet(const UNetConfig& config, std::uint64_t seed);
template <typename T>
UNet<T> build_model(ModelKind kind, const UNetConfig& config, std::uint64_t seed);

}  // namespace echoseg
