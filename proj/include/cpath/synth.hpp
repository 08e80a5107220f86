#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpath/image.hpp"
#include "cpath/rng.hpp"

namespace cpath::synth {

/// Two procedural texture families with matched mean color: oriented
/// sinusoidal stripes and isotropic Gaussian blobs. Both share the same color
/// palette, contrast and noise distributions, so only spatial structure
/// separates them.
enum class Family { stripes = 0, blobs = 1 };

struct TextureOptions {
  int side = 64;
  double min_period = 4.0;   // stripe period in pixels
  double max_period = 16.0;
  int min_blobs = 6;
  int max_blobs = 14;
  double min_radius = 2.0;   // blob sigma in pixels
  double max_radius = 4.5;
  double noise = 7.0;        // per-pixel Gaussian noise, 8-bit units
  double min_contrast = 0.3; // texture amplitude relative to the palette spread
  double max_contrast = 1.0;
  double gradient = 60.0;    // peak amplitude of a linear illumination ramp, 8-bit units
  double hue_center = 0.85;  // palette hue (fraction of the circle); pink-purple by default
  double hue_spread = 0.08;  // palette hue drawn from center +- spread
};

RgbImage make_texture(Family family, const TextureOptions& options, RngStream& rng);

struct TextureSet {
  std::vector<RgbImage> images;
  std::vector<int> labels;  // Family as int
};

/// count images alternating between the families; image i draws from the
/// stream (seed, i).
TextureSet generate_textures(int count, const TextureOptions& options, std::uint64_t seed);

}  // namespace cpath::synth
