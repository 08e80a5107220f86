#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cpath/image.hpp"
#include "cpath/rng.hpp"

namespace cpath::augment {

enum class JitterPreset { none, light, medium, heavy };

std::string to_string(JitterPreset p);
JitterPreset parse_jitter_preset(const std::string& s);

/// Maximum fractional change per color property. Brightness, contrast and
/// saturation factors are drawn from [max(0, 1 - s), 1 + s]; the hue shift is
/// drawn from [-h, h] of the full hue circle.
struct JitterStrength {
  double brightness = 0.0;
  double contrast = 0.0;
  double saturation = 0.0;
  double hue = 0.0;

  static JitterStrength from_preset(JitterPreset preset);
  bool is_identity() const { return brightness == 0 && contrast == 0 && saturation == 0 && hue == 0; }
};

struct AugmentConfig {
  bool random_crop = true;
  double crop_min_area = 0.01;
  double crop_max_area = 1.0;
  double aspect_min = 3.0 / 4.0;
  double aspect_max = 4.0 / 3.0;
  bool rotate = true;
  double flip_prob = 0.5;  // per axis
  JitterPreset jitter = JitterPreset::medium;
  double blur_prob = 0.5;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;
  double blur_kernel_fraction = 0.1;

  /// Throws ConfigError on an invalid combination.
  void validate() const;

  /// Every augmentation switched off: views equal the input.
  static AugmentConfig disabled();
};

/// Stream for one view: keyed by (global_seed, epoch, sample_index, view_index).
RngStream view_stream(std::uint64_t global_seed, std::uint64_t epoch, std::uint64_t sample_index,
                      std::uint64_t view_index);

/// Bilinear resize (half-pixel centers, edge clamp) with f64 arithmetic and
/// round-half-even quantization.
RgbImage resize_bilinear(const RgbImage& src, int width, int height);

struct CropBox {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

/// Draws a crop rectangle: area fraction ~ U[min, max], aspect ~ U[aspect_min,
/// aspect_max]. Falls back to the whole image after 10 rejected draws.
CropBox sample_crop(int width, int height, const AugmentConfig& cfg, RngStream& rng);

RgbImage random_resized_crop(const RgbImage& img, const AugmentConfig& cfg, RngStream& rng);

/// Counter-clockwise quarter turns; exact pixel permutation.
RgbImage rotate90(const RgbImage& img, int quarter_turns);
RgbImage flip_horizontal(const RgbImage& img);
RgbImage flip_vertical(const RgbImage& img);

/// Uniform quarter turn (when rotate is set) followed by an independent flip
/// on each axis. Square inputs only.
RgbImage rotate_flip(const RgbImage& img, RngStream& rng, bool rotate = true, double flip_prob = 0.5);

/// Float RGB working image in [0, 1], used by the photometric transforms.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // interleaved RGB
};

FloatImage to_float(const RgbImage& img);
/// Scales to [0, 255], clamps and rounds half to even.
RgbImage quantize(const FloatImage& img);

void adjust_brightness(FloatImage& img, double factor);
void adjust_contrast(FloatImage& img, double factor);
void adjust_saturation(FloatImage& img, double factor);
/// shift is a fraction of the hue circle.
void adjust_hue(FloatImage& img, double shift);

/// Applies the four adjustments in an rng-chosen order with per-call factors.
RgbImage color_jitter(const RgbImage& img, const JitterStrength& strength, RngStream& rng);
RgbImage color_jitter(const RgbImage& img, JitterPreset preset, RngStream& rng);

/// Kernel side for a patch: round(fraction * side), bumped to the next odd value.
int blur_kernel_size(int side, double fraction = 0.1);

/// Normalized 1-D Gaussian taps.
std::vector<double> gaussian_kernel(int size, double sigma);

/// Separable Gaussian with reflect padding; returns the unquantized result in
/// the 0..255 scale.
FloatImage gaussian_blur_exact(const RgbImage& img, double sigma, int kernel_size);
RgbImage gaussian_blur_fixed(const RgbImage& img, double sigma, int kernel_size);

/// With probability cfg.blur_prob blurs with sigma ~ U[blur_sigma_min, blur_sigma_max].
RgbImage gaussian_blur(const RgbImage& img, const AugmentConfig& cfg, RngStream& rng);

/// crop -> rotate/flip -> color jitter -> blur.
RgbImage augment_view(const RgbImage& img, const AugmentConfig& cfg, RngStream& rng);

std::pair<RgbImage, RgbImage> make_views(const RgbImage& img, const AugmentConfig& cfg, RngStream& first,
                                         RngStream& second);

}  // namespace cpath::augment
