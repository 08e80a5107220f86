#include "cpath/imaging.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "cpath/errors.hpp"

namespace cpath::imaging {

HsvPixel rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0;
  const double g = g8 / 255.0;
  const double b = b8 / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  HsvPixel out;
  out.v = mx;
  out.s = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) return out;
  double h;
  if (mx == r) {
    h = (g - b) / delta;
    if (h < 0.0) h += 6.0;
  } else if (mx == g) {
    h = (b - r) / delta + 2.0;
  } else {
    h = (r - g) / delta + 4.0;
  }
  out.h = h / 6.0;
  if (out.h >= 1.0) out.h -= 1.0;
  return out;
}

bool is_foreground(const HsvPixel& p, const ForegroundBand& band) {
  return p.h > band.hue_low && p.h < band.hue_high && p.s > band.saturation_low &&
         p.v > band.value_low && p.v < band.value_high;
}

double foreground_ratio(const RgbImage& image, const ForegroundBand& band) {
  if (image.empty()) throw ContractError("foreground_ratio of an empty image");
  std::size_t hits = 0;
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < n; ++i) {
    const auto* px = &image.pixels[i * 3];
    if (is_foreground(rgb_to_hsv(px[0], px[1], px[2]), band)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<ImagePatch> tile_source(const RgbImage& image, const TileOptions& options, const PatchMeta& meta) {
  if (options.side <= 0 || options.stride <= 0) throw ContractError("tile side and stride must be positive");
  if (options.min_foreground < 0.0 || options.min_foreground > 1.0) {
    throw ContractError("min_foreground must lie in [0, 1]");
  }
  std::vector<ImagePatch> out;
  if (image.width < options.side || image.height < options.side) {
    spdlog::warn("source '{}' is {}x{}, smaller than one {}px tile; no patches emitted", meta.source_id,
                 image.width, image.height, options.side);
    return out;
  }
  for (int y = 0; y + options.side <= image.height; y += options.stride) {
    for (int x = 0; x + options.side <= image.width; x += options.stride) {
      RgbImage window = image.crop(x, y, options.side, options.side);
      if (foreground_ratio(window, options.band) < options.min_foreground) continue;
      ImagePatch patch{std::move(window), meta};
      patch.meta.x = x;
      patch.meta.y = y;
      out.push_back(std::move(patch));
    }
  }
  return out;
}

}  // namespace cpath::imaging
