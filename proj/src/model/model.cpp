#include "cpath/model.hpp"

#include <cmath>

#include <json.hpp>

#include "cpath/container.hpp"
#include "cpath/errors.hpp"
#include "cpath/ops.hpp"
#include "cpath/rng.hpp"

namespace cpath::model {

namespace {

constexpr const char* kConfigEntry = "meta.config";

int conv_out(int side) {
  return (side + 2 - 3) / 2 + 1;
}

}  // namespace

int EncoderConfig::output_side() const {
  int side = input_side;
  for (std::size_t s = 0; s < stage_channels.size(); ++s) side = side >= 2 ? conv_out(side) : 0;
  return side;
}

void EncoderConfig::validate() const {
  if (stage_channels.empty()) throw ConfigError("encoder needs at least one stage");
  for (int c : stage_channels)
    if (c <= 0) throw ConfigError("encoder stage channels must be positive");
  if (blocks_per_stage < 1) throw ConfigError("encoder blocks_per_stage must be >= 1");
  if (input_side < 2) throw ConfigError("encoder input_side must be >= 2");
  int side = input_side;
  for (std::size_t s = 0; s < stage_channels.size(); ++s) {
    if (side + 2 < 3) throw ConfigError("encoder input too small for the number of stages");
    side = conv_out(side);
  }
  if (side < 1) throw ConfigError("spatial side after all stages must be >= 1");
}

void ProjectionConfig::validate() const {
  if (hidden_dim < 0) throw ConfigError("projection hidden_dim must be >= 0");
  if (out_dim < 2) throw ConfigError("projection out_dim must be >= 2");
}

template <typename T>
BasicModel<T>::BasicModel(EncoderConfig encoder, ProjectionConfig projection)
    : encoder_(std::move(encoder)), projection_(projection) {
  encoder_.validate();
  projection_.validate();
  auto add = [this](std::string name, tg::Shape shape, bool is_bias) {
    params_.push_back({std::move(name), tg::Tensor<T>::zeros(std::move(shape), true), is_bias});
    return params_.size() - 1;
  };
  std::int64_t in_ch = 3;
  for (std::size_t s = 0; s < encoder_.stage_channels.size(); ++s) {
    const std::int64_t ch = encoder_.stage_channels[s];
    for (int b = 0; b < encoder_.blocks_per_stage; ++b) {
      const std::string prefix = "encoder.stage" + std::to_string(s) + ".block" + std::to_string(b);
      const std::int64_t cin = b == 0 ? in_ch : ch;
      const std::size_t w = add(prefix + ".weight", {ch, cin, 3, 3}, false);
      add(prefix + ".bias", {ch}, true);
      blocks_.push_back({w, b == 0 ? 2 : 1, b > 0 && encoder_.residual});
    }
    in_ch = ch;
  }
  head_begin_ = params_.size();
  const std::int64_t d = encoder_.feature_dim();
  const std::int64_t h = hidden_dim();
  add("head.fc1.weight", {d, h}, false);
  add("head.fc1.bias", {h}, true);
  add("head.fc2.weight", {h, projection_.out_dim}, false);
  add("head.fc2.bias", {projection_.out_dim}, true);
}

template <typename T>
int BasicModel<T>::hidden_dim() const {
  return projection_.hidden_dim > 0 ? projection_.hidden_dim : encoder_.feature_dim();
}

template <typename T>
BasicModel<T> BasicModel<T>::init(const EncoderConfig& encoder, const ProjectionConfig& projection,
                                  std::uint64_t seed) {
  BasicModel model(encoder, projection);
  for (auto& p : model.params_) {
    if (p.is_bias) continue;
    const auto& shape = p.value.shape();
    // conv: [F,C,kh,kw] -> fan_in = C*kh*kw; linear: [D,E] -> fan_in = D
    const std::int64_t fan_in = shape.size() == 4 ? shape[1] * shape[2] * shape[3] : shape[0];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    RngStream rng{seed, hash_string(p.name), 0x696E6974ull /* "init" */};
    for (auto& v : p.value.mutable_data()) v = static_cast<T>(rng.uniform(-bound, bound));
  }
  return model;
}

template <typename T>
tg::Tensor<T> BasicModel<T>::encode(const tg::Tensor<T>& batch) const {
  if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != encoder_.input_side ||
      batch.dim(3) != encoder_.input_side) {
    throw DimensionError("encode expects [N,3," + std::to_string(encoder_.input_side) + "," +
                         std::to_string(encoder_.input_side) + "], got " + tg::shape_str(batch.shape()));
  }
  tg::Tensor<T> x = batch;
  for (const auto& block : blocks_) {
    auto y = tg::relu(tg::conv2d(x, params_[block.weight].value, params_[block.weight + 1].value, block.stride, 1));
    x = block.skip ? tg::add(y, x) : y;
  }
  return tg::global_avg_pool(x);
}

template <typename T>
tg::Tensor<T> BasicModel<T>::project(const tg::Tensor<T>& features) const {
  if (features.rank() != 2 || features.dim(1) != encoder_.feature_dim()) {
    throw DimensionError("project expects [N," + std::to_string(encoder_.feature_dim()) + "], got " +
                         tg::shape_str(features.shape()));
  }
  const auto& p = params_;
  auto hidden = tg::relu(tg::linear(features, p[head_begin_].value, p[head_begin_ + 1].value));
  auto z = tg::linear(hidden, p[head_begin_ + 2].value, p[head_begin_ + 3].value);
  return tg::l2_normalize(z, static_cast<T>(1e-12));
}

template <typename T>
std::vector<Param<T>> BasicModel<T>::encoder_params() const {
  return {params_.begin(), params_.begin() + static_cast<std::ptrdiff_t>(head_begin_)};
}

template <typename T>
const tg::Tensor<T>& BasicModel<T>::param(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.value;
  throw ContractError("no parameter named '" + name + "'");
}

template <typename T>
void BasicModel<T>::set_requires_grad(bool on) {
  for (auto& p : params_) p.value.set_requires_grad(on);
}

template <typename T>
void BasicModel<T>::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

template <typename T>
BasicModel<T> BasicModel<T>::clone() const {
  return cast<T>();
}

template <typename T>
std::size_t BasicModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

template <typename T>
tg::Tensor<T> images_to_tensor(std::span<const RgbImage> images) {
  if (images.empty()) throw ContractError("images_to_tensor needs at least one image");
  const int side = images.front().width;
  for (const auto& img : images) {
    if (img.width != side || img.height != side) throw DimensionError("batch images must share one square size");
  }
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  std::vector<T> data(images.size() * 3 * plane);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& px = images[n].pixels;
    T* dst = data.data() + n * 3 * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      for (int c = 0; c < 3; ++c) dst[c * plane + i] = static_cast<T>(px[i * 3 + c]) / static_cast<T>(255);
    }
  }
  return tg::Tensor<T>::from({static_cast<std::int64_t>(images.size()), 3, side, side}, std::move(data));
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  nlohmann::json meta;
  const auto& ec = model.encoder_config();
  const auto& pc = model.projection_config();
  meta["encoder"] = {{"input_side", ec.input_side},
                     {"stage_channels", ec.stage_channels},
                     {"blocks_per_stage", ec.blocks_per_stage},
                     {"residual", ec.residual}};
  meta["projection"] = {{"hidden_dim", pc.hidden_dim}, {"out_dim", pc.out_dim}};
  std::vector<io::Entry> entries;
  entries.push_back(io::Entry::text(kConfigEntry, meta.dump()));
  for (const auto& p : model.params()) {
    std::vector<std::uint64_t> dims(p.value.shape().begin(), p.value.shape().end());
    entries.push_back(io::Entry::floats(p.name, std::move(dims), {p.value.data().begin(), p.value.data().end()}));
  }
  io::write_container(path, entries);
}

Model load_checkpoint(const std::filesystem::path& path) {
  const auto entries = io::read_container(path);
  const io::Entry* config = nullptr;
  for (const auto& e : entries)
    if (e.name == kConfigEntry) config = &e;
  if (!config || config->dtype != io::DType::u8) throw ParseError("checkpoint has no " + std::string(kConfigEntry));
  EncoderConfig ec;
  ProjectionConfig pc;
  try {
    const auto meta = nlohmann::json::parse(config->as_text());
    ec.input_side = meta.at("encoder").at("input_side").get<int>();
    ec.stage_channels = meta.at("encoder").at("stage_channels").get<std::vector<int>>();
    ec.blocks_per_stage = meta.at("encoder").at("blocks_per_stage").get<int>();
    ec.residual = meta.at("encoder").at("residual").get<bool>();
    pc.hidden_dim = meta.at("projection").at("hidden_dim").get<int>();
    pc.out_dim = meta.at("projection").at("out_dim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint config is malformed: ") + e.what());
  }
  Model model(ec, pc);
  if (entries.size() != model.params().size() + 1) {
    throw ParseError("checkpoint has " + std::to_string(entries.size() - 1) + " parameters, architecture needs " +
                     std::to_string(model.params().size()));
  }
  for (auto& p : model.params()) {
    const io::Entry* found = nullptr;
    for (const auto& e : entries)
      if (e.name == p.name) found = &e;
    if (!found || found->dtype != io::DType::f32) throw ParseError("checkpoint lacks parameter '" + p.name + "'");
    const std::vector<std::uint64_t> dims(p.value.shape().begin(), p.value.shape().end());
    if (found->dims != dims) throw ParseError("checkpoint parameter '" + p.name + "' has the wrong shape");
    std::copy(found->f32.begin(), found->f32.end(), p.value.mutable_data().begin());
  }
  return model;
}

template class BasicModel<float>;
template class BasicModel<double>;
template tg::Tensor<float> images_to_tensor<float>(std::span<const RgbImage>);
template tg::Tensor<double> images_to_tensor<double>(std::span<const RgbImage>);

}  // namespace cpath::model
