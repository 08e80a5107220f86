#include "cpath/features.hpp"

#include <algorithm>

#include "cpath/container.hpp"
#include "cpath/errors.hpp"
#include "cpath/tensor.hpp"

namespace cpath {

FeatureMatrix encode_features(const model::Model& model, std::span<const RgbImage> images, int chunk) {
  if (chunk < 1) throw ContractError("feature chunk size must be >= 1");
  tg::NoGradGuard no_grad;
  FeatureMatrix out;
  out.rows = static_cast<std::int64_t>(images.size());
  out.cols = model.encoder_config().feature_dim();
  out.values.reserve(static_cast<std::size_t>(out.rows * out.cols));
  for (std::size_t begin = 0; begin < images.size(); begin += static_cast<std::size_t>(chunk)) {
    const std::size_t n = std::min(images.size() - begin, static_cast<std::size_t>(chunk));
    auto h = model.encode(model::images_to_tensor<float>(images.subspan(begin, n)));
    out.values.insert(out.values.end(), h.data().begin(), h.data().end());
  }
  return out;
}

void save_features(const FeatureMatrix& features, const std::filesystem::path& path) {
  std::vector<io::Entry> entries;
  entries.push_back(io::Entry::floats(
      "features", {static_cast<std::uint64_t>(features.rows), static_cast<std::uint64_t>(features.cols)},
      features.values));
  io::write_container(path, entries);
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  const auto entries = io::read_container(path);
  if (entries.size() != 1 || entries[0].name != "features" || entries[0].dtype != io::DType::f32 ||
      entries[0].dims.size() != 2) {
    throw ParseError(path.string() + ": expected a single rank-2 f32 entry named 'features'");
  }
  FeatureMatrix f;
  f.rows = static_cast<std::int64_t>(entries[0].dims[0]);
  f.cols = static_cast<std::int64_t>(entries[0].dims[1]);
  f.values = entries[0].f32;
  return f;
}

}  // namespace cpath
