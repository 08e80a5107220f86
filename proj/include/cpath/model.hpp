#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cpath/image.hpp"
#include "cpath/tensor.hpp"

namespace cpath::model {

/// Desk-scale residual CNN. Each stage opens with a stride-2 3x3 conv + ReLU;
/// further blocks in the stage are stride-1 3x3 conv + ReLU with an identity
/// skip when `residual` is set.
struct EncoderConfig {
  int input_side = 64;
  std::vector<int> stage_channels{16, 32, 64, 128};
  int blocks_per_stage = 1;
  bool residual = true;

  int feature_dim() const { return stage_channels.empty() ? 0 : stage_channels.back(); }
  int output_side() const;
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

/// hidden_dim == 0 means "same as the encoder feature dimension".
struct ProjectionConfig {
  int hidden_dim = 0;
  int out_dim = 128;

  void validate() const;
  bool operator==(const ProjectionConfig&) const = default;
};

template <typename T>
struct Param {
  std::string name;
  tg::Tensor<T> value;
  bool is_bias = false;
};

/// Encoder f plus projection head p. Parameters are shared handles; use
/// clone() for an independent copy.
template <typename T>
class BasicModel {
 public:
  BasicModel(EncoderConfig encoder, ProjectionConfig projection);

  /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases. Every
  /// parameter draws from its own stream keyed by (seed, name).
  static BasicModel init(const EncoderConfig& encoder, const ProjectionConfig& projection, std::uint64_t seed);

  /// [N,3,S,S] pixels in [0,1] -> pooled features [N,feature_dim].
  tg::Tensor<T> encode(const tg::Tensor<T>& batch) const;
  /// [N,feature_dim] -> unit-norm rows [N,out_dim].
  tg::Tensor<T> project(const tg::Tensor<T>& features) const;

  const EncoderConfig& encoder_config() const { return encoder_; }
  const ProjectionConfig& projection_config() const { return projection_; }
  int hidden_dim() const;

  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }
  std::vector<Param<T>> encoder_params() const;
  const tg::Tensor<T>& param(const std::string& name) const;

  void set_requires_grad(bool on);
  void zero_grad();
  BasicModel clone() const;

  template <typename U>
  BasicModel<U> cast() const {
    BasicModel<U> out(encoder_, projection_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto src = params_[i].value.data();
      auto dst = out.params()[i].value.mutable_data();
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<U>(src[k]);
    }
    return out;
  }

  std::size_t parameter_count() const;

 private:
  struct ConvBlock {
    std::size_t weight;  // index into params_
    int stride;
    bool skip;
  };

  EncoderConfig encoder_;
  ProjectionConfig projection_;
  std::vector<Param<T>> params_;
  std::vector<ConvBlock> blocks_;
  std::size_t head_begin_ = 0;
};

using Model = BasicModel<float>;

/// Packs equally sized square images into [N,3,S,S], scaled by 1/255.
template <typename T>
tg::Tensor<T> images_to_tensor(std::span<const RgbImage> images);

/// Checkpoint (.sslh): a "meta.config" text entry with the architecture plus
/// one f32 entry per named parameter.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace cpath::model
