#include "cpath/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cpath/errors.hpp"

namespace cpath::synth {

namespace {

struct Rgb {
  double r, g, b;
};

// Palette loosely around stained tissue: a hue from a narrow band,
// moderate saturation, with a light and a dark shade.
std::pair<Rgb, Rgb> draw_colors(const TextureOptions& o, RngStream& rng) {
  auto hsv = [](double h, double s, double v) {
    h = h - std::floor(h);
    const double c = v * s;
    const double hp = h * 6.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) r = c, g = x;
    else if (hp < 2) r = x, g = c;
    else if (hp < 3) g = c, b = x;
    else if (hp < 4) g = x, b = c;
    else if (hp < 5) r = x, b = c;
    else r = c, b = x;
    const double m = v - c;
    return Rgb{(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0};
  };
  const double hue = o.hue_center + rng.uniform(-o.hue_spread, o.hue_spread);
  const double sat = rng.uniform(0.2, 0.8);
  const double mid = rng.uniform(0.35, 0.75);
  const double spread = rng.uniform(0.15, 0.3);
  return {hsv(hue, sat * 0.6, std::min(1.0, mid + spread)), hsv(hue + rng.uniform(-0.05, 0.05), sat, mid - spread)};
}

}  // namespace

RgbImage make_texture(Family family, const TextureOptions& o, RngStream& rng) {
  if (o.side < 4) throw ContractError("texture side must be >= 4");
  const int n = o.side;
  std::vector<double> field(static_cast<std::size_t>(n) * n, 0.0);

  if (family == Family::stripes) {
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double period = rng.uniform(o.min_period, o.max_period);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double c = std::cos(theta), s = std::sin(theta);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        field[static_cast<std::size_t>(y) * n + x] =
            std::sin(2.0 * std::numbers::pi * (c * x + s * y) / period + phase);
  } else {
    const int count = o.min_blobs + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(o.max_blobs - o.min_blobs + 1)));
    for (int b = 0; b < count; ++b) {
      const double cx = rng.uniform(0.0, n), cy = rng.uniform(0.0, n);
      const double sigma = rng.uniform(o.min_radius, o.max_radius);
      const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const double dx = x - cx, dy = y - cy;
          field[static_cast<std::size_t>(y) * n + x] += sign * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
    }
  }

  // Center to mean zero and scale to peak 1 so both families share the mean
  // color exactly (before noise and quantization).
  double mean = 0.0;
  for (double v : field) mean += v;
  mean /= static_cast<double>(field.size());
  double peak = 0.0;
  for (double& v : field) {
    v -= mean;
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 0.0)
    for (double& v : field) v /= peak;

  const auto [light, dark] = draw_colors(o, rng);
  const double contrast = o.min_contrast == o.max_contrast
                              ? o.min_contrast
                              : std::exp(rng.uniform(std::log(o.min_contrast), std::log(o.max_contrast)));
  const double ramp_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ramp = o.gradient * rng.uniform();
  const double rx = std::cos(ramp_angle) * ramp / n, ry = std::sin(ramp_angle) * ramp / n;
  const Rgb mid{(light.r + dark.r) / 2, (light.g + dark.g) / 2, (light.b + dark.b) / 2};
  const Rgb half{(light.r - dark.r) / 2, (light.g - dark.g) / 2, (light.b - dark.b) / 2};
  RgbImage img(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double f = contrast * field[static_cast<std::size_t>(y) * n + x];
      const double shade = rx * (x - n / 2.0) + ry * (y - n / 2.0);
      const double px[3] = {mid.r + half.r * f, mid.g + half.g * f, mid.b + half.b * f};
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::nearbyint(px[ch] + shade + o.noise * rng.normal());
        img.pixels[(static_cast<std::size_t>(y) * n + x) * 3 + ch] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  return img;
}

TextureSet generate_textures(int count, const TextureOptions& options, std::uint64_t seed) {
  if (count < 0) throw ContractError("texture count must be non-negative");
  TextureSet out;
  out.images.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const Family family = i % 2 == 0 ? Family::stripes : Family::blobs;
    RngStream rng{seed, static_cast<std::uint64_t>(i), 0x73796E7468ull /* "synth" */};
    out.images.push_back(make_texture(family, options, rng));
    out.labels.push_back(static_cast<int>(family));
  }
  return out;
}

}  // namespace cpath::synth
