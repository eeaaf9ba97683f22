#include "echoseg/image_io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "echoseg/errors.hpp"

namespace echoseg {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::string& bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) throw FormatError("truncated PNM header");
    return bytes_.substr(start, pos_ - start);
  }

  std::size_t number() {
    const std::string t = token();
    std::size_t value = 0;
    for (char ch : t) {
      if (!std::isdigit(static_cast<unsigned char>(ch))) throw FormatError("bad PNM header field '" + t + "'");
      value = value * 10 + static_cast<std::size_t>(ch - '0');
      if (value > (1u << 24)) throw FormatError("PNM header field too large");
    }
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw FormatError("missing whitespace before PNM raster");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

struct PnmHeader {
  std::size_t width, height, maxval, offset;
};

PnmHeader parse_header(const std::string& bytes, const char* magic, std::size_t channels) {
  HeaderReader reader(bytes);
  if (reader.token() != magic) throw FormatError(std::string("not a binary ") + magic + " file");
  PnmHeader h{};
  h.width = reader.number();
  h.height = reader.number();
  h.maxval = reader.number();
  if (h.width == 0 || h.height == 0) throw FormatError("PNM image has zero size");
  if (h.maxval == 0 || h.maxval > 255) throw FormatError("only 8-bit PNM (maxval 1..255) is supported");
  h.offset = reader.raster_offset();
  if (bytes.size() < h.offset + h.width * h.height * channels) throw FormatError("truncated PNM raster");
  return h;
}

}  // namespace

GrayImage parse_pgm(const std::string& bytes) {
  const PnmHeader h = parse_header(bytes, "P5", 1);
  GrayImage img{h.width, h.height, {}};
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.offset),
                    bytes.begin() + static_cast<std::ptrdiff_t>(h.offset + h.width * h.height));
  if (h.maxval != 255) {
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>((p * 255u + h.maxval / 2) / h.maxval);
  }
  return img;
}

std::string encode_pgm(const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  return out;
}

RgbImage parse_ppm(const std::string& bytes) {
  const PnmHeader h = parse_header(bytes, "P6", 3);
  RgbImage img{h.width, h.height, {}};
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.offset),
                    bytes.begin() + static_cast<std::ptrdiff_t>(h.offset + 3 * h.width * h.height));
  return img;
}

std::string encode_ppm(const RgbImage& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

GrayImage read_pgm(const std::filesystem::path& path) {
  try {
    return parse_pgm(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  write_file(path, encode_pgm(image));
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  write_file(path, encode_ppm(image));
}

}  // namespace echoseg
