#include "cpath/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cpath/errors.hpp"

namespace cpath::augment {

namespace {

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

double clamp01(double v) {
  return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  v = mx;
  s = mx > 0.0 ? delta / mx : 0.0;
  h = 0.0;
  if (delta <= 0.0) return;
  if (mx == r) {
    h = (g - b) / delta;
    if (h < 0.0) h += 6.0;
  } else if (mx == g) {
    h = (b - r) / delta + 2.0;
  } else {
    h = (r - g) / delta + 4.0;
  }
  h /= 6.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  if (s <= 0.0) {
    r = g = b = v;
    return;
  }
  const double hh = (h - std::floor(h)) * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

// Mirror without repeating the edge sample.
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i >= n ? period - i : i;
}

}  // namespace

std::string to_string(JitterPreset p) {
  switch (p) {
    case JitterPreset::none: return "none";
    case JitterPreset::light: return "light";
    case JitterPreset::medium: return "medium";
    case JitterPreset::heavy: return "heavy";
  }
  return "none";
}

JitterPreset parse_jitter_preset(const std::string& s) {
  if (s == "none") return JitterPreset::none;
  if (s == "light") return JitterPreset::light;
  if (s == "medium") return JitterPreset::medium;
  if (s == "heavy") return JitterPreset::heavy;
  throw ConfigError("unknown jitter preset '" + s + "' (expected none, light, medium or heavy)");
}

JitterStrength JitterStrength::from_preset(JitterPreset preset) {
  switch (preset) {
    case JitterPreset::none: return {};
    case JitterPreset::light: return {0.4, 0.4, 0.4, 0.2};
    case JitterPreset::medium: return {0.8, 0.8, 0.8, 0.2};
    case JitterPreset::heavy: return {0.8, 0.8, 0.8, 0.4};
  }
  return {};
}

void AugmentConfig::validate() const {
  if (!(crop_min_area > 0.0 && crop_min_area <= crop_max_area && crop_max_area <= 1.0)) {
    throw ConfigError("augment: need 0 < crop_min_area <= crop_max_area <= 1");
  }
  if (!(aspect_min > 0.0 && aspect_min <= aspect_max)) {
    throw ConfigError("augment: need 0 < aspect_min <= aspect_max");
  }
  if (flip_prob < 0.0 || flip_prob > 1.0) throw ConfigError("augment: flip_prob outside [0, 1]");
  if (blur_prob < 0.0 || blur_prob > 1.0) throw ConfigError("augment: blur_prob outside [0, 1]");
  if (!(blur_sigma_min > 0.0 && blur_sigma_min <= blur_sigma_max)) {
    throw ConfigError("augment: need 0 < blur_sigma_min <= blur_sigma_max");
  }
  if (!(blur_kernel_fraction > 0.0 && blur_kernel_fraction <= 1.0)) {
    throw ConfigError("augment: blur_kernel_fraction outside (0, 1]");
  }
}

AugmentConfig AugmentConfig::disabled() {
  AugmentConfig cfg;
  cfg.random_crop = false;
  cfg.crop_min_area = 1.0;
  cfg.aspect_min = cfg.aspect_max = 1.0;
  cfg.rotate = false;
  cfg.flip_prob = 0.0;
  cfg.jitter = JitterPreset::none;
  cfg.blur_prob = 0.0;
  return cfg;
}

RngStream view_stream(std::uint64_t global_seed, std::uint64_t epoch, std::uint64_t sample_index,
                      std::uint64_t view_index) {
  return RngStream{global_seed, epoch, sample_index, view_index, 0x76696577ull /* "view" */};
}

RgbImage resize_bilinear(const RgbImage& src, int width, int height) {
  if (src.empty() || width <= 0 || height <= 0) throw ContractError("resize of an empty image");
  RgbImage out(width, height);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  std::vector<int> x0(width), x1(width);
  std::vector<double> fx(width);
  for (int x = 0; x < width; ++x) {
    double p = (x + 0.5) * sx - 0.5;
    p = std::clamp(p, 0.0, static_cast<double>(src.width - 1));
    x0[x] = static_cast<int>(std::floor(p));
    x1[x] = std::min(x0[x] + 1, src.width - 1);
    fx[x] = p - x0[x];
  }
  for (int y = 0; y < height; ++y) {
    double p = (y + 0.5) * sy - 0.5;
    p = std::clamp(p, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(std::floor(p));
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double fy = p - y0;
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - fx[x]) * src.at(x0[x], y0, c) + fx[x] * src.at(x1[x], y0, c);
        const double bottom = (1.0 - fx[x]) * src.at(x0[x], y1, c) + fx[x] * src.at(x1[x], y1, c);
        const double v = (1.0 - fy) * top + fy * bottom;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
      }
    }
  }
  return out;
}

CropBox sample_crop(int width, int height, const AugmentConfig& cfg, RngStream& rng) {
  const double area = static_cast<double>(width) * height;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(cfg.crop_min_area, cfg.crop_max_area);
    const double aspect = rng.uniform(cfg.aspect_min, cfg.aspect_max);
    const int w = static_cast<int>(std::lround(std::sqrt(target * aspect)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / aspect)));
    if (w > 0 && h > 0 && w <= width && h <= height) {
      CropBox box;
      box.width = w;
      box.height = h;
      box.x = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(width - w + 1)));
      box.y = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(height - h + 1)));
      return box;
    }
  }
  return CropBox{0, 0, width, height};
}

RgbImage random_resized_crop(const RgbImage& img, const AugmentConfig& cfg, RngStream& rng) {
  if (img.empty()) throw ContractError("random_resized_crop of an empty image");
  const CropBox box = sample_crop(img.width, img.height, cfg, rng);
  return resize_bilinear(img.crop(box.x, box.y, box.width, box.height), img.width, img.height);
}

RgbImage rotate90(const RgbImage& img, int quarter_turns) {
  if (img.width != img.height) throw ContractError("rotation needs a square image");
  const int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return img;
  const int s = img.width;
  RgbImage out(s, s);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      int sx, sy;
      switch (k) {
        case 1: sx = s - 1 - y; sy = x; break;
        case 2: sx = s - 1 - x; sy = s - 1 - y; break;
        default: sx = y; sy = s - 1 - x; break;
      }
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

RgbImage flip_horizontal(const RgbImage& img) {
  RgbImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
  return out;
}

RgbImage flip_vertical(const RgbImage& img) {
  RgbImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, img.height - 1 - y, c);
  return out;
}

RgbImage rotate_flip(const RgbImage& img, RngStream& rng, bool rotate, double flip_prob) {
  if (img.width != img.height) throw ContractError("rotate_flip needs a square image");
  const int turns = static_cast<int>(rng.uniform_int(4));
  const bool flip_h = rng.bernoulli(flip_prob);
  const bool flip_v = rng.bernoulli(flip_prob);
  RgbImage out = rotate ? rotate90(img, turns) : img;
  if (flip_h) out = flip_horizontal(out);
  if (flip_v) out = flip_vertical(out);
  return out;
}

FloatImage to_float(const RgbImage& img) {
  FloatImage out{img.width, img.height, std::vector<double>(img.pixels.size())};
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.values[i] = img.pixels[i] / 255.0;
  return out;
}

RgbImage quantize(const FloatImage& img) {
  RgbImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::nearbyint(img.values[i] * 255.0), 0.0, 255.0));
  }
  return out;
}

void adjust_brightness(FloatImage& img, double factor) {
  for (auto& v : img.values) v = clamp01(v * factor);
}

void adjust_contrast(FloatImage& img, double factor) {
  const std::size_t n = img.values.size() / 3;
  if (n == 0) return;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += kLumaR * img.values[3 * i] + kLumaG * img.values[3 * i + 1] + kLumaB * img.values[3 * i + 2];
  }
  const double mean = total / static_cast<double>(n);
  for (auto& v : img.values) v = clamp01(factor * v + (1.0 - factor) * mean);
}

void adjust_saturation(FloatImage& img, double factor) {
  const std::size_t n = img.values.size() / 3;
  for (std::size_t i = 0; i < n; ++i) {
    double* px = &img.values[3 * i];
    const double gray = kLumaR * px[0] + kLumaG * px[1] + kLumaB * px[2];
    for (int c = 0; c < 3; ++c) px[c] = clamp01(factor * px[c] + (1.0 - factor) * gray);
  }
}

void adjust_hue(FloatImage& img, double shift) {
  if (shift == 0.0) return;
  const std::size_t n = img.values.size() / 3;
  for (std::size_t i = 0; i < n; ++i) {
    double* px = &img.values[3 * i];
    double h, s, v;
    rgb_to_hsv(px[0], px[1], px[2], h, s, v);
    if (s <= 0.0) continue;
    h += shift;
    h -= std::floor(h);
    hsv_to_rgb(h, s, v, px[0], px[1], px[2]);
  }
}

RgbImage color_jitter(const RgbImage& img, const JitterStrength& strength, RngStream& rng) {
  if (strength.is_identity()) return img;
  const double brightness = rng.uniform(std::max(0.0, 1.0 - strength.brightness), 1.0 + strength.brightness);
  const double contrast = rng.uniform(std::max(0.0, 1.0 - strength.contrast), 1.0 + strength.contrast);
  const double saturation = rng.uniform(std::max(0.0, 1.0 - strength.saturation), 1.0 + strength.saturation);
  const double hue = rng.uniform(-strength.hue, strength.hue);
  std::array<int, 4> order{0, 1, 2, 3};
  for (int i = 3; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[i], order[j]);
  }
  FloatImage work = to_float(img);
  for (int op : order) {
    switch (op) {
      case 0: if (strength.brightness > 0.0) adjust_brightness(work, brightness); break;
      case 1: if (strength.contrast > 0.0) adjust_contrast(work, contrast); break;
      case 2: if (strength.saturation > 0.0) adjust_saturation(work, saturation); break;
      default: if (strength.hue > 0.0) adjust_hue(work, hue); break;
    }
  }
  return quantize(work);
}

RgbImage color_jitter(const RgbImage& img, JitterPreset preset, RngStream& rng) {
  return color_jitter(img, JitterStrength::from_preset(preset), rng);
}

int blur_kernel_size(int side, double fraction) {
  int k = static_cast<int>(std::lround(fraction * side));
  if (k < 1) k = 1;
  if (k % 2 == 0) ++k;
  return k;
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw ContractError("gaussian kernel size must be odd and positive");
  if (sigma <= 0.0) throw ContractError("gaussian sigma must be positive");
  const int r = size / 2;
  std::vector<double> taps(static_cast<std::size_t>(size));
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - r;
    taps[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    total += taps[i];
  }
  for (auto& t : taps) t /= total;
  return taps;
}

FloatImage gaussian_blur_exact(const RgbImage& img, double sigma, int kernel_size) {
  const auto taps = gaussian_kernel(kernel_size, sigma);
  const int r = kernel_size / 2;
  const int w = img.width, h = img.height;
  std::vector<double> horizontal(img.pixels.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int t = -r; t <= r; ++t) s += taps[t + r] * img.at(reflect_index(x + t, w), y, c);
        horizontal[(static_cast<std::size_t>(y) * w + x) * 3 + c] = s;
      }
    }
  }
  FloatImage out{w, h, std::vector<double>(img.pixels.size())};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int t = -r; t <= r; ++t) {
          s += taps[t + r] * horizontal[(static_cast<std::size_t>(reflect_index(y + t, h)) * w + x) * 3 + c];
        }
        out.values[(static_cast<std::size_t>(y) * w + x) * 3 + c] = s;
      }
    }
  }
  return out;
}

RgbImage gaussian_blur_fixed(const RgbImage& img, double sigma, int kernel_size) {
  const FloatImage exact = gaussian_blur_exact(img, sigma, kernel_size);
  RgbImage out(img.width, img.height);
  for (std::size_t i = 0; i < exact.values.size(); ++i) {
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::nearbyint(exact.values[i]), 0.0, 255.0));
  }
  return out;
}

RgbImage gaussian_blur(const RgbImage& img, const AugmentConfig& cfg, RngStream& rng) {
  const bool apply = rng.bernoulli(cfg.blur_prob);
  const double sigma = rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max);
  if (!apply) return img;
  return gaussian_blur_fixed(img, sigma, blur_kernel_size(img.width, cfg.blur_kernel_fraction));
}

RgbImage augment_view(const RgbImage& img, const AugmentConfig& cfg, RngStream& rng) {
  RgbImage out = cfg.random_crop ? random_resized_crop(img, cfg, rng) : img;
  if (cfg.rotate || cfg.flip_prob > 0.0) out = rotate_flip(out, rng, cfg.rotate, cfg.flip_prob);
  out = color_jitter(out, cfg.jitter, rng);
  if (cfg.blur_prob > 0.0) out = gaussian_blur(out, cfg, rng);
  return out;
}

std::pair<RgbImage, RgbImage> make_views(const RgbImage& img, const AugmentConfig& cfg, RngStream& first,
                                         RngStream& second) {
  return {augment_view(img, cfg, first), augment_view(img, cfg, second)};
}

}  // namespace cpath::augment
