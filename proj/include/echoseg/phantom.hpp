#pragma once

#include <cstdint>

#include "echoseg/dataset.hpp"

namespace echoseg {

struct Range {
  double lo;
  double hi;
};

/// Synthetic apical-view echo frame: a dark ultrasound sector on black,
/// containing an elliptical cavity (the segmentation target) surrounded by
/// a bright wall, with multiplicative log-normal speckle.
struct PhantomConfig {
  std::size_t height = 112;
  std::size_t width = 112;
  Range lv_area_fraction{0.04, 0.20};   // cavity area / image area
  Range eccentricity{1.2, 2.5};         // major / minor axis
  Range wall_brightness{0.5, 0.9};
  Range cavity_brightness{0.0, 0.15};
  Range tissue_brightness{0.2, 0.35};   // sector background
  Range wall_thickness{0.03, 0.06};     // fraction of min(H, W)
  Range speckle_sigma{0.05, 0.2};
  double sector_angle_deg = 75.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// True when the pixel centre (row, col) lies inside the imaging sector.
bool in_sector(const PhantomConfig& config, std::size_t row, std::size_t col);

/// Deterministic in (config.seed, index). The mask is the exact cavity
/// interior, rejection-sampled so its pixel area lies in lv_area_fraction
/// and the whole wall lies inside the sector.
Sample generate_phantom(const PhantomConfig& config, std::size_t index);

std::vector<Sample> generate_phantoms(const PhantomConfig& config, std::size_t count,
                                      std::size_t first_index = 0);

}  // namespace echoseg
