#include "echoseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "echoseg/rng.hpp"

namespace echoseg {

namespace fs = std::filesystem;

Tensor<float> image_to_tensor(const GrayImage& image) {
  Tensor<float> t(Shape{1, image.height, image.width});
  for (std::size_t i = 0; i < image.pixels.size(); ++i) t[i] = static_cast<float>(image.pixels[i]) / 255.0f;
  return t;
}

Tensor<float> mask_to_tensor(const GrayImage& image) {
  Tensor<float> t(Shape{1, image.height, image.width});
  for (std::size_t i = 0; i < image.pixels.size(); ++i) t[i] = image.pixels[i] > 127 ? 1.0f : 0.0f;
  return t;
}

GrayImage tensor_to_image(const Tensor<float>& values) {
  const Shape& s = values.shape();
  if (s.size() < 2) throw ShapeError("tensor_to_image: need at least 2 dims");
  GrayImage img{s[s.size() - 1], s[s.size() - 2], {}};
  if (img.width * img.height != values.size()) throw ShapeError("tensor_to_image: expected a single plane");
  img.pixels.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = std::clamp(values[i], 0.0f, 1.0f);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return img;
}

GrayImage mask_to_image(const Mask& mask) {
  GrayImage img{mask.width, mask.height, std::vector<std::uint8_t>(mask.pixels.size())};
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) img.pixels[i] = mask.pixels[i] ? 255 : 0;
  return img;
}

namespace {
std::map<std::string, fs::path> pgm_files(const fs::path& dir) {
  std::map<std::string, fs::path> files;
  if (!fs::is_directory(dir)) throw std::runtime_error("missing directory '" + dir.string() + "'");
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      files[entry.path().stem().string()] = entry.path();
    }
  }
  return files;
}
}  // namespace

std::vector<Sample> load_dataset(const fs::path& dir) {
  const auto images = pgm_files(dir / "images");
  const auto masks = pgm_files(dir / "masks");
  for (const auto& [stem, path] : images) {
    if (!masks.count(stem)) throw FormatError("image '" + stem + "' has no mask (" + (dir / "masks").string() + ")");
  }
  for (const auto& [stem, path] : masks) {
    if (!images.count(stem)) throw FormatError("mask '" + stem + "' has no image (" + (dir / "images").string() + ")");
  }
  std::vector<Sample> samples;
  samples.reserve(images.size());
  for (const auto& [stem, image_path] : images) {
    const GrayImage image = read_pgm(image_path);
    const GrayImage mask = read_pgm(masks.at(stem));
    if (image.width != mask.width || image.height != mask.height) {
      throw FormatError("size mismatch for '" + stem + "': image " + std::to_string(image.width) + "x" +
                        std::to_string(image.height) + ", mask " + std::to_string(mask.width) + "x" +
                        std::to_string(mask.height));
    }
    samples.push_back({stem, image_to_tensor(image), mask_to_tensor(mask)});
  }
  return samples;
}

void save_dataset(const fs::path& dir, const std::vector<Sample>& samples) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  for (const auto& s : samples) {
    write_pgm(dir / "images" / (s.id + ".pgm"), tensor_to_image(s.image));
    write_pgm(dir / "masks" / (s.id + ".pgm"), mask_to_image(mask_from_tensor(s.mask)));
  }
}

std::vector<std::pair<std::string, GrayImage>> load_images(const fs::path& dir) {
  std::vector<std::pair<std::string, GrayImage>> out;
  for (const auto& [stem, path] : pgm_files(dir)) out.emplace_back(stem, read_pgm(path));
  return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(const std::vector<Sample>& samples,
                                                                   std::size_t n_train,
                                                                   std::size_t n_test,
                                                                   std::uint64_t seed) {
  if (n_train + n_test > samples.size()) {
    throw ValidationError("split_dataset: requested " + std::to_string(n_train) + "+" +
                          std::to_string(n_test) + " samples but only " +
                          std::to_string(samples.size()) + " available");
  }
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (std::size_t i = 0; i < n_train; ++i) out.first.push_back(samples[order[i]]);
  for (std::size_t i = n_train; i < n_train + n_test; ++i) out.second.push_back(samples[order[i]]);
  return out;
}

std::pair<Tensor<float>, Tensor<float>> stack_batch(const std::vector<Sample>& samples,
                                                    const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ValidationError("stack_batch: empty batch");
  const std::size_t h = samples.at(indices[0]).height(), w = samples.at(indices[0]).width();
  Tensor<float> images(Shape{indices.size(), 1, h, w});
  Tensor<float> masks(Shape{indices.size(), 1, h, w});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Sample& s = samples.at(indices[b]);
    if (s.height() != h || s.width() != w) {
      throw ShapeError("stack_batch: sample '" + s.id + "' is " + std::to_string(s.height()) + "x" +
                       std::to_string(s.width()) + ", batch is " + std::to_string(h) + "x" + std::to_string(w));
    }
    std::copy(s.image.data().begin(), s.image.data().end(), images.data().begin() + b * h * w);
    std::copy(s.mask.data().begin(), s.mask.data().end(), masks.data().begin() + b * h * w);
  }
  return {std::move(images), std::move(masks)};
}

}  // namespace echoseg
