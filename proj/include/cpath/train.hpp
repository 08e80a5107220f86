#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cpath/augment.hpp"
#include "cpath/data.hpp"
#include "cpath/image.hpp"
#include "cpath/model.hpp"
#include "cpath/optim.hpp"

namespace cpath::train {

/// batch_size counts views: every step encodes batch_size / 2 source images
/// twice.
struct PretrainConfig {
  int batch_size = 512;
  double temperature = 0.1;
  int epochs = 50;
  optim::OptimConfig optimizer;
  augment::AugmentConfig augment;
  model::EncoderConfig encoder;
  model::ProjectionConfig projection;
  std::uint64_t seed = 0;
  int checkpoint_every = 10;  // epochs; 0 keeps only the final checkpoint
  int workers = 1;            // augmentation workers
  int queue_depth = 4;        // prepared batches held ahead of the optimizer
  std::optional<std::int64_t> inject_nan_at_step;  // fault-injection hook for tests

  /// 64x64 inputs, 50 epochs, batch 64, LARS with the batch-scaled rate,
  /// crops of at least 25% area.
  static PretrainConfig desk();
  /// 224x224 inputs, 1000 epochs, batch 512, LARS 0.6.
  static PretrainConfig paper();

  void validate() const;
};

struct EpochLoss {
  int epoch = 0;
  double mean_loss = 0.0;
};

struct PretrainResult {
  model::Model model;
  std::vector<EpochLoss> trace;
  std::int64_t steps = 0;
  std::vector<std::filesystem::path> checkpoints;
};

/// Views of source image `index` in `epoch` for the given config; both views
/// are resized to the encoder input side.
std::pair<RgbImage, RgbImage> training_views(const RgbImage& image, const PretrainConfig& cfg, std::uint64_t epoch,
                                             std::uint64_t index);

/// Seeded permutation of [0, n) used for epoch `epoch`.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

/// Runs contrastive pretraining. When out_dir is set, checkpoints
/// (checkpoint_eXXXX.sslh, final.sslh) and loss_trace.csv are written there.
/// A non-finite loss or gradient aborts with NumericError after saving the
/// last good parameters to last_good.sslh.
PretrainResult pretrain(const std::vector<RgbImage>& images, const PretrainConfig& cfg,
                        const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Header "epoch,mean_loss" and one row per epoch with 9 significant digits.
std::string format_loss_trace(const std::vector<EpochLoss>& trace);
void export_loss_trace(const std::vector<EpochLoss>& trace, const std::filesystem::path& path);

/// Loads the images behind sampled entries and resizes them to side x side.
std::vector<RgbImage> load_images(const std::vector<data::SampledEntry>& entries, int side,
                                  const std::filesystem::path& base_dir = {});

}  // namespace cpath::train
