#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "echoseg/image_io.hpp"
#include "echoseg/metrics.hpp"
#include "echoseg/tensor.hpp"

namespace echoseg {

/// One grayscale frame and its binary mask, both shaped (1, H, W).
struct Sample {
  std::string id;
  Tensor<float> image;  // values in [0, 1]
  Tensor<float> mask;   // values in {0, 1}

  std::size_t height() const { return image.dim(1); }
  std::size_t width() const { return image.dim(2); }
};

Tensor<float> image_to_tensor(const GrayImage& image);   // /255
Tensor<float> mask_to_tensor(const GrayImage& image);    // > 127
GrayImage tensor_to_image(const Tensor<float>& values);  // round(v * 255), clamped
GrayImage mask_to_image(const Mask& mask);               // 0 / 255

/// Reads `<dir>/images/<stem>.pgm` paired with `<dir>/masks/<stem>.pgm`,
/// sorted by stem.
std::vector<Sample> load_dataset(const std::filesystem::path& dir);

/// Writes samples under the same layout (creates directories).
void save_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples);

/// Reads every `*.pgm` in `dir` (sorted); used for inference inputs.
std::vector<std::pair<std::string, GrayImage>> load_images(const std::filesystem::path& dir);

/// Seeded shuffle, then the first n_train go to train and the next n_test to test.
std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(const std::vector<Sample>& samples,
                                                                   std::size_t n_train,
                                                                   std::size_t n_test,
                                                                   std::uint64_t seed);

/// Stacks the selected samples into (B,1,H,W) image and mask batches.
std::pair<Tensor<float>, Tensor<float>> stack_batch(const std::vector<Sample>& samples,
                                                    const std::vector<std::size_t>& indices);

}  // namespace echoseg
