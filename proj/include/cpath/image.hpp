#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cpath {

/// Row-major interleaved 8-bit RGB raster.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill = 0);

  bool empty() const { return width == 0 || height == 0; }
  std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  /// Window copy; the window must lie inside the image.
  RgbImage crop(int x, int y, int w, int h) const;

  bool operator==(const RgbImage&) const = default;
};

enum class Resolution { x10, x20, x40, unknown };

std::string to_string(Resolution r);
/// Accepts "10x", "20x", "40x", "unknown".
Resolution parse_resolution(const std::string& s);

struct PatchMeta {
  std::string dataset_id;
  std::string source_id;
  int x = 0;
  int y = 0;
  Resolution resolution = Resolution::unknown;

  bool operator==(const PatchMeta&) const = default;
};

struct ImagePatch {
  RgbImage image;
  PatchMeta meta;
};

/// Reads PNG or BMP (anything the codec backend decodes) as RGB.
RgbImage read_image(const std::filesystem::path& path);
/// Writes PNG, creating parent directories.
void write_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace cpath
