#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "cpath/imaging.hpp"
#include "cpath/rng.hpp"

using namespace cpath;
using namespace cpath::imaging;

namespace {

// A tissue-colored pixel: h ~ 0.557, s ~ 0.30, v ~ 0.70.
constexpr std::uint8_t kTissue[3] = {125, 160, 178};

RgbImage filled(int w, int h, const std::uint8_t rgb[3]) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.set(x, y, rgb[0], rgb[1], rgb[2]);
  return img;
}

HsvPixel textbook_hsv(double r, double g, double b) {
  r /= 255; g /= 255; b /= 255;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
  double h = 0;
  if (d > 0) {
    if (mx == r) h = std::fmod((g - b) / d + 6.0, 6.0);
    else if (mx == g) h = (b - r) / d + 2;
    else h = (r - g) / d + 4;
    h /= 6;
  }
  return {h, mx > 0 ? d / mx : 0.0, mx};
}

bool oracle_foreground(const HsvPixel& p) {
  return p.h > 0.5 && p.h < 0.65 && p.s > 0.1 && p.v > 0.5 && p.v < 0.9;
}

}  // namespace

TEST(RgbToHsv, Examples) {
  auto red = rgb_to_hsv(255, 0, 0);
  EXPECT_EQ(red.h, 0.0); EXPECT_EQ(red.s, 1.0); EXPECT_EQ(red.v, 1.0);
  auto white = rgb_to_hsv(255, 255, 255);
  EXPECT_EQ(white.h, 0.0); EXPECT_EQ(white.s, 0.0); EXPECT_EQ(white.v, 1.0);
  auto brown = rgb_to_hsv(128, 64, 32);
  EXPECT_NEAR(brown.h, 1.0 / 18.0, 1e-6);
  EXPECT_NEAR(brown.s, 0.75, 1e-6);
  EXPECT_NEAR(brown.v, 128.0 / 255.0, 1e-6);
}

TEST(RgbToHsv, MatchesTextbookOnRandomPixels) {
  RngStream rng{11};
  for (int i = 0; i < 5000; ++i) {
    const auto r = rng.uniform_int(256), g = rng.uniform_int(256), b = rng.uniform_int(256);
    const auto got = rgb_to_hsv(r, g, b);
    const auto ref = textbook_hsv(r, g, b);
    EXPECT_NEAR(got.h, ref.h, 1e-9);
    EXPECT_NEAR(got.s, ref.s, 1e-9);
    EXPECT_NEAR(got.v, ref.v, 1e-9);
  }
}

TEST(IsForeground, Examples) {
  EXPECT_TRUE(is_foreground({0.55, 0.3, 0.7}));
  EXPECT_FALSE(is_foreground({0.55, 0.3, 0.95}));
  EXPECT_FALSE(is_foreground({0.5, 0.3, 0.7}));
}

TEST(IsForeground, BandPassSweepsAreStrict) {
  const double eps = 1e-6;
  EXPECT_FALSE(is_foreground({0.5 - eps, 0.3, 0.7}));
  EXPECT_TRUE(is_foreground({0.5 + eps, 0.3, 0.7}));
  EXPECT_TRUE(is_foreground({0.65 - eps, 0.3, 0.7}));
  EXPECT_FALSE(is_foreground({0.65 + eps, 0.3, 0.7}));
  EXPECT_FALSE(is_foreground({0.65, 0.3, 0.7}));
  EXPECT_FALSE(is_foreground({0.55, 0.1, 0.7}));
  EXPECT_TRUE(is_foreground({0.55, 0.1 + eps, 0.7}));
  EXPECT_FALSE(is_foreground({0.55, 0.3, 0.5}));
  EXPECT_TRUE(is_foreground({0.55, 0.3, 0.5 + eps}));
  EXPECT_FALSE(is_foreground({0.55, 0.3, 0.9}));
  EXPECT_TRUE(is_foreground({0.55, 0.3, 0.9 - eps}));
}

TEST(IsForeground, PureAndMatchesOracle) {
  RngStream rng{12};
  for (int i = 0; i < 10000; ++i) {
    HsvPixel p{rng.uniform(), rng.uniform(), rng.uniform()};
    EXPECT_EQ(is_foreground(p), oracle_foreground(p));
    EXPECT_EQ(is_foreground(p), is_foreground(p));
  }
}

TEST(ForegroundRatio, Examples) {
  ASSERT_TRUE(is_foreground(rgb_to_hsv(kTissue[0], kTissue[1], kTissue[2])));
  EXPECT_EQ(foreground_ratio(filled(8, 8, kTissue)), 1.0);
  const std::uint8_t white[3] = {255, 255, 255};
  EXPECT_EQ(foreground_ratio(filled(8, 8, white)), 0.0);
  RgbImage half = filled(2, 2, white);
  half.set(0, 0, kTissue[0], kTissue[1], kTissue[2]);
  half.set(1, 1, kTissue[0], kTissue[1], kTissue[2]);
  EXPECT_EQ(foreground_ratio(half), 0.5);
}

TEST(TileSource, FourQuadrants) {
  auto patches = tile_source(filled(448, 448, kTissue));
  ASSERT_EQ(patches.size(), 4u);
  std::vector<std::pair<int, int>> pos;
  for (const auto& p : patches) {
    pos.emplace_back(p.meta.x, p.meta.y);
    EXPECT_EQ(p.image.width, 224);
    EXPECT_EQ(p.image.height, 224);
  }
  std::sort(pos.begin(), pos.end());
  EXPECT_EQ(pos, (std::vector<std::pair<int, int>>{{0, 0}, {0, 224}, {224, 0}, {224, 224}}));
  const std::uint8_t white[3] = {255, 255, 255};
  EXPECT_TRUE(tile_source(filled(448, 448, white)).empty());
}

TEST(TileSource, MatchesPixelCountOracleAndCropsExactly) {
  RngStream rng{13};
  const int W = 100, H = 80;
  RgbImage img(W, H, 255);
  // one tissue quadrant plus random tissue speckle elsewhere
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if ((x < W / 2 && y < H / 2) || rng.bernoulli(0.45)) img.set(x, y, kTissue[0], kTissue[1], kTissue[2]);
  TileOptions opt;
  opt.side = 20;
  opt.stride = 10;
  const auto patches = tile_source(img, opt);
  std::size_t expected = 0, k = 0;
  for (int y = 0; y + 20 <= H; y += 10)
    for (int x = 0; x + 20 <= W; x += 10) {
      int count = 0;
      for (int yy = y; yy < y + 20; ++yy)
        for (int xx = x; xx < x + 20; ++xx)
          count += oracle_foreground(textbook_hsv(img.at(xx, yy, 0), img.at(xx, yy, 1), img.at(xx, yy, 2)));
      if (count * 2 >= 400) {
        ++expected;
        ASSERT_LT(k, patches.size());
        EXPECT_EQ(patches[k].meta.x, x);
        EXPECT_EQ(patches[k].meta.y, y);
        EXPECT_EQ(patches[k].image, img.crop(x, y, 20, 20));
        ++k;
      }
    }
  EXPECT_EQ(patches.size(), expected);
  EXPECT_GT(expected, 0u);
  EXPECT_LE(patches.size(), static_cast<std::size_t>(((H - 20) / 10 + 1) * ((W - 20) / 10 + 1)));
}

TEST(TileSource, HalfForegroundRule) {
  const std::uint8_t white[3] = {255, 255, 255};
  for (int fg : {49, 50, 51}) {
    RgbImage img = filled(10, 10, white);
    for (int i = 0; i < fg; ++i) img.set(i % 10, i / 10, kTissue[0], kTissue[1], kTissue[2]);
    TileOptions opt;
    opt.side = 10;
    opt.stride = 10;
    EXPECT_EQ(tile_source(img, opt).size(), fg >= 50 ? 1u : 0u) << fg;
  }
}

TEST(TileSource, BordersAreDropped) {
  auto patches = tile_source(filled(500, 300, kTissue));
  EXPECT_EQ(patches.size(), 2u);
}
