#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cpath/image.hpp"
#include "cpath/model.hpp"

namespace cpath {

/// Dense row-major feature matrix, one row per image.
struct FeatureMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<float> values;

  std::span<const float> row(std::int64_t i) const {
    return {values.data() + i * cols, static_cast<std::size_t>(cols)};
  }
  bool operator==(const FeatureMatrix&) const = default;
};

/// Pooled encoder features (the projection head is not used), computed
/// without gradient tracking in chunks of `chunk` images.
FeatureMatrix encode_features(const model::Model& model, std::span<const RgbImage> images, int chunk = 64);

/// Features file: checkpoint-style container with one f32 entry "features".
void save_features(const FeatureMatrix& features, const std::filesystem::path& path);
FeatureMatrix load_features(const std::filesystem::path& path);

}  // namespace cpath
