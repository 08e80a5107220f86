#pragma once

#include <cstdint>
#include <vector>

#include "cpath/image.hpp"

namespace cpath::imaging {

/// Hexcone HSV with every component in [0, 1]. Hue is 0 for achromatic pixels.
struct HsvPixel {
  double h = 0.0;
  double s = 0.0;
  double v = 0.0;
};

HsvPixel rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Tissue band of the foreground rule. All bounds are exclusive.
struct ForegroundBand {
  double hue_low = 0.5;
  double hue_high = 0.65;
  double saturation_low = 0.1;
  double value_low = 0.5;
  double value_high = 0.9;
};

bool is_foreground(const HsvPixel& p, const ForegroundBand& band = {});

/// Fraction of pixels that pass is_foreground.
double foreground_ratio(const RgbImage& image, const ForegroundBand& band = {});

struct TileOptions {
  int side = 224;
  int stride = 224;
  double min_foreground = 0.5;
  ForegroundBand band{};
};

/// Grid tiling that keeps windows whose foreground ratio is at least
/// min_foreground. Borders narrower than one tile are dropped. Patches come
/// out ordered by (y, x) with meta.x / meta.y set; dataset and source ids are
/// copied from `meta`.
std::vector<ImagePatch> tile_source(const RgbImage& image, const TileOptions& options = {},
                                    const PatchMeta& meta = {});

}  // namespace cpath::imaging
