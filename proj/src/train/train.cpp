#include "cpath/train.hpp"

#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

#include "cpath/contrastive.hpp"
#include "cpath/errors.hpp"
#include "cpath/ops.hpp"
#include "cpath/rng.hpp"

namespace cpath::train {

namespace {

struct PreparedBatch {
  std::vector<RgbImage> views;  // 2k and 2k+1 belong to the same source
};

// Augmentation workers fill batches ahead of the optimizer. Batch b is built
// entirely from per-sample streams, so the content never depends on which
// worker produced it or when.
class BatchPipeline {
 public:
  BatchPipeline(const std::vector<RgbImage>& images, const PretrainConfig& cfg, std::uint64_t epoch,
                std::vector<std::size_t> order, std::size_t batches)
      : images_(images), cfg_(cfg), epoch_(epoch), order_(std::move(order)), batches_(batches) {
    const int workers = std::max(1, cfg.workers);
    for (int w = 0; w < workers; ++w) threads_.emplace_back([this] { work(); });
  }

  ~BatchPipeline() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    threads_.clear();
  }

  PreparedBatch take(std::size_t b) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return ready_.count(b) || error_; });
    if (error_) std::rethrow_exception(error_);
    PreparedBatch out = std::move(ready_[b]);
    ready_.erase(b);
    consumed_ = b + 1;
    cv_.notify_all();
    return out;
  }

 private:
  void work() {
    const std::size_t per = static_cast<std::size_t>(cfg_.batch_size / 2);
    const std::size_t depth = static_cast<std::size_t>(std::max(1, cfg_.queue_depth));
    while (true) {
      std::size_t b;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return stop_ || next_ >= batches_ || next_ < consumed_ + depth; });
        if (stop_ || next_ >= batches_) return;
        b = next_++;
      }
      PreparedBatch batch;
      try {
        batch.views.reserve(2 * per);
        for (std::size_t k = 0; k < per; ++k) {
          const std::size_t idx = order_[b * per + k];
          auto [v1, v2] = training_views(images_[idx], cfg_, epoch_, idx);
          batch.views.push_back(std::move(v1));
          batch.views.push_back(std::move(v2));
        }
      } catch (...) {
        std::lock_guard lock(mutex_);
        if (!error_) error_ = std::current_exception();
        cv_.notify_all();
        return;
      }
      std::lock_guard lock(mutex_);
      ready_.emplace(b, std::move(batch));
      cv_.notify_all();
    }
  }

  const std::vector<RgbImage>& images_;
  const PretrainConfig& cfg_;
  std::uint64_t epoch_;
  std::vector<std::size_t> order_;
  std::size_t batches_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::size_t, PreparedBatch> ready_;
  std::size_t next_ = 0;
  std::size_t consumed_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
  std::vector<std::jthread> threads_;  // declared last: joined before the rest is destroyed
};

std::string epoch_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "checkpoint_e%04d.sslh", epoch);
  return buf;
}

}  // namespace

PretrainConfig PretrainConfig::desk() {
  PretrainConfig c;
  c.batch_size = 64;
  c.epochs = 50;
  c.encoder.input_side = 64;
  // 1% of a 64x64 patch is a 6x6 crop, too small to keep any texture
  c.augment.crop_min_area = 0.25;
  c.optimizer.kind = optim::OptimKind::lars;
  c.optimizer.base_lr = optim::lr_for(optim::OptimKind::lars, c.batch_size);
  return c;
}

PretrainConfig PretrainConfig::paper() {
  PretrainConfig c;
  c.batch_size = 512;
  c.epochs = 1000;
  c.encoder.input_side = 224;
  c.optimizer.kind = optim::OptimKind::lars;
  c.optimizer.base_lr = optim::lr_for(optim::OptimKind::lars, c.batch_size);
  return c;
}

void PretrainConfig::validate() const {
  if (batch_size < 2 || batch_size % 2 != 0) throw ConfigError("batch_size must be even and >= 2 (it counts views)");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (queue_depth < 1) throw ConfigError("queue_depth must be >= 1");
  optimizer.validate();
  augment.validate();
  encoder.validate();
  projection.validate();
}

std::pair<RgbImage, RgbImage> training_views(const RgbImage& image, const PretrainConfig& cfg, std::uint64_t epoch,
                                             std::uint64_t index) {
  auto first = augment::view_stream(cfg.seed, epoch, index, 0);
  auto second = augment::view_stream(cfg.seed, epoch, index, 1);
  auto views = augment::make_views(image, cfg.augment, first, second);
  const int side = cfg.encoder.input_side;
  if (views.first.width != side || views.first.height != side)
    views.first = augment::resize_bilinear(views.first, side, side);
  if (views.second.width != side || views.second.height != side)
    views.second = augment::resize_bilinear(views.second, side, side);
  return views;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng{seed, epoch, 0x6F72646572ull /* "order" */};
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(i))]);
  return order;
}

PretrainResult pretrain(const std::vector<RgbImage>& images, const PretrainConfig& cfg,
                        const std::optional<std::filesystem::path>& out_dir) {
  cfg.validate();
  const std::size_t per = static_cast<std::size_t>(cfg.batch_size / 2);
  if (images.size() < per) {
    throw ConfigError("pretraining needs at least batch_size/2 = " + std::to_string(per) + " images, got " +
                      std::to_string(images.size()));
  }
  if (out_dir) std::filesystem::create_directories(*out_dir);

  PretrainResult result{model::Model::init(cfg.encoder, cfg.projection, cfg.seed), {}, 0, {}};
  auto& net = result.model;
  net.set_requires_grad(true);
  optim::Optimizer<float> opt(cfg.optimizer, optim::slots_of(net.params()));
  const std::size_t batches = images.size() / per;  // last partial batch dropped

  auto save = [&](const std::string& name) {
    if (!out_dir) return;
    const auto path = *out_dir / name;
    model::save_checkpoint(net, path);
    result.checkpoints.push_back(path);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    BatchPipeline pipeline(images, cfg, static_cast<std::uint64_t>(epoch),
                           epoch_order(images.size(), cfg.seed, static_cast<std::uint64_t>(epoch)), batches);
    double total = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      PreparedBatch batch = pipeline.take(b);
      net.zero_grad();
      auto x = model::images_to_tensor<float>(batch.views);
      auto z = net.project(net.encode(x));
      auto loss = contrastive::nt_xent(contrastive::ContrastiveBatch<float>::adjacent_pairs(z, cfg.temperature));
      double value = loss.item();
      if (cfg.inject_nan_at_step && *cfg.inject_nan_at_step == result.steps) value = std::nan("");
      if (!std::isfinite(value)) {
        save("last_good.sslh");
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(result.steps) + "; last good parameters kept");
      }
      tg::backward(loss);
      try {
        opt.step();
      } catch (const NumericError&) {
        save("last_good.sslh");
        throw;
      }
      ++result.steps;
      total += value;
    }
    const double mean_loss = batches ? total / static_cast<double>(batches) : 0.0;
    result.trace.push_back({epoch, mean_loss});
    spdlog::debug("epoch {} mean loss {:.6f}", epoch, mean_loss);
    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs) {
      save(epoch_name(epoch + 1));
    }
  }
  save("final.sslh");
  if (out_dir) export_loss_trace(result.trace, *out_dir / "loss_trace.csv");
  net.set_requires_grad(false);
  return result;
}

std::string format_loss_trace(const std::vector<EpochLoss>& trace) {
  std::string out = "epoch,mean_loss\n";
  char buf[64];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.9g\n", e.epoch, e.mean_loss);
    out += buf;
  }
  return out;
}

void export_loss_trace(const std::vector<EpochLoss>& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_loss_trace(trace);
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<RgbImage> load_images(const std::vector<data::SampledEntry>& entries, int side,
                                  const std::filesystem::path& base_dir) {
  std::vector<RgbImage> out(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    std::filesystem::path p = entries[i].entry.path;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    RgbImage img = read_image(p);
    if (img.width != side || img.height != side) img = augment::resize_bilinear(img, side, side);
    out[i] = std::move(img);
  }
  return out;
}

}  // namespace cpath::train
