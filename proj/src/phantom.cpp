#include "echoseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "echoseg/rng.hpp"

namespace echoseg {

namespace {

void check_range(const Range& r, const char* name, double lo, double hi) {
  if (!(r.lo < r.hi) || r.lo < lo || r.hi > hi) {
    throw ValidationError(std::string("phantom ") + name + " range [" + std::to_string(r.lo) + ", " +
                          std::to_string(r.hi) + "] must be non-empty and within [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

struct Ellipse {
  double cx, cy;    // pixel coordinates (x right, y down)
  double a, b;      // semi-axes, a along the rotated y axis
  double cos_t, sin_t;

  // Normalised radius^2 of point (x, y) for the ellipse grown by `grow` pixels.
  double radius2(double x, double y, double grow = 0.0) const {
    const double dx = x - cx, dy = y - cy;
    const double u = dx * cos_t - dy * sin_t;  // minor-axis coordinate
    const double v = dx * sin_t + dy * cos_t;  // major-axis coordinate
    const double bb = b + grow, aa = a + grow;
    return (u * u) / (bb * bb) + (v * v) / (aa * aa);
  }
};

struct SectorGeometry {
  double apex_x, apex_y, radius, half_angle;

  explicit SectorGeometry(const PhantomConfig& c)
      : apex_x(static_cast<double>(c.width) / 2.0),
        apex_y(0.0),
        radius(0.97 * static_cast<double>(c.height)),
        half_angle(c.sector_angle_deg * std::numbers::pi / 360.0) {}

  bool contains(double x, double y) const {
    const double dx = x - apex_x, dy = y - apex_y;
    if (dy <= 0.0) return false;
    return std::hypot(dx, dy) <= radius && std::abs(std::atan2(dx, dy)) <= half_angle;
  }
};

}  // namespace

void PhantomConfig::validate() const {
  if (height < 8 || width < 8) throw ValidationError("phantom size must be at least 8x8");
  check_range(lv_area_fraction, "lv_area_fraction", 1e-4, 0.5);
  check_range(eccentricity, "eccentricity", 1.0, 10.0);
  check_range(wall_brightness, "wall_brightness", 0.0, 1.0);
  check_range(cavity_brightness, "cavity_brightness", 0.0, 1.0);
  check_range(tissue_brightness, "tissue_brightness", 0.0, 1.0);
  check_range(wall_thickness, "wall_thickness", 0.0, 0.25);
  check_range(speckle_sigma, "speckle_sigma", 0.0, 2.0);
  if (!(sector_angle_deg > 10.0 && sector_angle_deg < 180.0)) {
    throw ValidationError("sector_angle_deg must lie in (10, 180)");
  }
}

bool in_sector(const PhantomConfig& config, std::size_t row, std::size_t col) {
  return SectorGeometry(config).contains(static_cast<double>(col) + 0.5, static_cast<double>(row) + 0.5);
}

Sample generate_phantom(const PhantomConfig& config, std::size_t index) {
  config.validate();
  Rng rng(derive_seed(config.seed, index));
  const SectorGeometry sector(config);
  const std::size_t h = config.height, w = config.width;
  const double area = static_cast<double>(h * w);
  const double short_side = static_cast<double>(std::min(h, w));

  Ellipse cavity{};
  double wall = 0.0;
  std::vector<std::uint8_t> inside(h * w);
  bool accepted = false;
  for (int attempt = 0; attempt < 10000 && !accepted; ++attempt) {
    const double fraction = rng.uniform(config.lv_area_fraction.lo, config.lv_area_fraction.hi);
    const double ecc = rng.uniform(config.eccentricity.lo, config.eccentricity.hi);
    const double tilt = rng.uniform(-25.0, 25.0) * std::numbers::pi / 180.0;
    cavity.b = std::sqrt(fraction * area / (std::numbers::pi * ecc));
    cavity.a = ecc * cavity.b;
    cavity.cos_t = std::cos(tilt);
    cavity.sin_t = std::sin(tilt);
    cavity.cx = static_cast<double>(w) * rng.uniform(0.38, 0.62);
    cavity.cy = static_cast<double>(h) * rng.uniform(0.35, 0.65);
    wall = short_side * rng.uniform(config.wall_thickness.lo, config.wall_thickness.hi);

    // The outer wall boundary must stay inside the sector.
    bool fits = true;
    for (int k = 0; k < 128 && fits; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / 128.0;
      const double u = (cavity.b + wall) * std::cos(phi);
      const double v = (cavity.a + wall) * std::sin(phi);
      const double x = cavity.cx + u * cavity.cos_t + v * cavity.sin_t;
      const double y = cavity.cy - u * cavity.sin_t + v * cavity.cos_t;
      fits = x >= 0.0 && y >= 0.0 && x < static_cast<double>(w) && y < static_cast<double>(h) &&
             sector.contains(x, y);
    }
    if (!fits) continue;

    std::size_t count = 0;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const double x = static_cast<double>(j) + 0.5, y = static_cast<double>(i) + 0.5;
        const bool in = cavity.radius2(x, y) <= 1.0 && sector.contains(x, y);
        inside[i * w + j] = in ? 1 : 0;
        count += in ? 1 : 0;
      }
    }
    const double measured = static_cast<double>(count) / area;
    accepted = measured >= config.lv_area_fraction.lo && measured <= config.lv_area_fraction.hi;
  }
  if (!accepted) throw ValidationError("phantom configuration admits no cavity that fits the sector");

  const double tissue = rng.uniform(config.tissue_brightness.lo, config.tissue_brightness.hi);
  const double wall_level = rng.uniform(config.wall_brightness.lo, config.wall_brightness.hi);
  const double cavity_level = rng.uniform(config.cavity_brightness.lo, config.cavity_brightness.hi);
  const double sigma = rng.uniform(config.speckle_sigma.lo, config.speckle_sigma.hi);

  Sample s;
  char id[32];
  std::snprintf(id, sizeof(id), "phantom_%05zu", index);
  s.id = id;
  s.image = Tensor<float>(Shape{1, h, w});
  s.mask = Tensor<float>(Shape{1, h, w});
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double x = static_cast<double>(j) + 0.5, y = static_cast<double>(i) + 0.5;
      // Draw noise for every pixel so the stream does not depend on geometry.
      const double speckle = std::exp(sigma * rng.normal());
      if (!sector.contains(x, y)) continue;
      double level = tissue;
      if (inside[i * w + j]) {
        level = cavity_level;
      } else if (cavity.radius2(x, y, wall) <= 1.0) {
        level = wall_level;
      }
      // Mild depth attenuation.
      const double depth = std::hypot(x - sector.apex_x, y - sector.apex_y) / sector.radius;
      level *= 1.0 - 0.25 * depth;
      s.image[i * w + j] = static_cast<float>(std::clamp(level * speckle, 0.0, 1.0));
      s.mask[i * w + j] = inside[i * w + j] ? 1.0f : 0.0f;
    }
  }
  return s;
}

std::vector<Sample> generate_phantoms(const PhantomConfig& config, std::size_t count,
                                      std::size_t first_index) {
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_phantom(config, first_index + i));
  return out;
}

}  // namespace echoseg
