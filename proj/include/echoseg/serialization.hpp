#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "echoseg/models.hpp"
#include "echoseg/optim.hpp"

namespace echoseg {

// TensorFile layout (little-endian):
//   "MTNS" | u16 version | u8 dtype (0=f32, 1=f64) | u8 ndim | ndim x u32 dims | payload
inline constexpr std::uint16_t kTensorFileVersion = 1;

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

/// Sequential reader over an in-memory byte buffer; throws FormatError on
/// reads past the end.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::string_view take(std::size_t n);
  std::size_t position() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void append_tensor(std::string& out, const Tensor<T>& tensor);
AnyTensor read_tensor(ByteReader& reader);

template <typename T>
std::string encode_tensor(const Tensor<T>& tensor);
/// Decodes exactly one TensorFile; trailing bytes are a format error.
AnyTensor decode_tensor(std::string_view bytes);

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& tensor);
AnyTensor load_tensor(const std::filesystem::path& path);

/// Model configuration, parameters and (optionally) optimizer state.
///
/// On disk: `key=value` text lines terminated by a blank line, followed by
/// named TensorFile blocks, each prefixed by a u16 name length and the name.
/// Adam moments are stored as `adam.m.<param>` / `adam.v.<param>`.
struct Checkpoint {
  ModelKind kind = ModelKind::vanilla;
  UNetConfig config;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::vector<std::pair<std::string, Tensor<float>>> parameters;
  std::optional<AdamState<float>> adam;
  std::map<std::string, std::string> metadata;  // free-form echo (training config)
};

Checkpoint make_checkpoint(const UNet<float>& model, const Adam<float>* optimizer, std::size_t epoch,
                           std::map<std::string, std::string> metadata = {});

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes);

/// Writes to a temporary sibling then renames over `path`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Builds the model described by the checkpoint's own config and loads its
/// parameters.
UNet<float> restore_model(const Checkpoint& checkpoint);

/// Copies checkpoint parameters into an existing model. Throws IntegrityError
/// listing missing, unexpected or mis-shaped names; the model is untouched
/// on failure.
void restore_parameters(UNet<float>& model, const Checkpoint& checkpoint);

}  // namespace echoseg
