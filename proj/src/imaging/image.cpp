#include "cpath/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "cpath/errors.hpp"

namespace cpath {

RgbImage::RgbImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

RgbImage RgbImage::crop(int x, int y, int w, int h) const {
  if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > width || y + h > height) {
    throw ContractError("crop window outside image");
  }
  RgbImage out(w, h);
  for (int row = 0; row < h; ++row) {
    const auto* src = &pixels[(static_cast<std::size_t>(y + row) * width + x) * 3];
    std::copy(src, src + static_cast<std::size_t>(w) * 3, &out.pixels[static_cast<std::size_t>(row) * w * 3]);
  }
  return out;
}

std::string to_string(Resolution r) {
  switch (r) {
    case Resolution::x10: return "10x";
    case Resolution::x20: return "20x";
    case Resolution::x40: return "40x";
    case Resolution::unknown: return "unknown";
  }
  return "unknown";
}

Resolution parse_resolution(const std::string& s) {
  if (s == "10x") return Resolution::x10;
  if (s == "20x") return Resolution::x20;
  if (s == "40x") return Resolution::x40;
  if (s == "unknown") return Resolution::unknown;
  throw ParseError("unknown resolution tag '" + s + "' (expected 10x, 20x, 40x or unknown)");
}

RgbImage read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot decode image " + path.string());
  RgbImage out(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) out.set(x, y, row[x][2], row[x][1], row[x][0]);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  cv::Mat bgr(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x) {
      row[x] = cv::Vec3b(image.at(x, y, 2), image.at(x, y, 1), image.at(x, y, 0));
    }
  }
  if (!cv::imwrite(path.string(), bgr)) throw IoError("cannot write " + path.string());
}

}  // namespace cpath
