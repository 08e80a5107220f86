#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cpath/errors.hpp"
#include "cpath/synth.hpp"
#include "cpath/train.hpp"

using namespace cpath;
using namespace cpath::train;

namespace {

PretrainConfig tiny() {
  PretrainConfig c = PretrainConfig::desk();
  c.encoder.input_side = 16;
  c.encoder.stage_channels = {4, 8};
  c.projection.out_dim = 8;
  c.batch_size = 8;
  c.epochs = 2;
  c.seed = 5;
  c.checkpoint_every = 1;
  c.optimizer.base_lr = optim::lr_for(optim::OptimKind::lars, c.batch_size);
  return c;
}

std::vector<RgbImage> images(int n) {
  synth::TextureOptions o;
  o.side = 16;
  return synth::generate_textures(n, o, 77).images;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cpath_test_train_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_params(const model::Model& a, const model::Model& b) {
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    auto x = a.params()[i].value.data();
    auto y = b.params()[i].value.data();
    if (!std::equal(x.begin(), x.end(), y.begin(), y.end())) return false;
  }
  return true;
}

}  // namespace

TEST(Train, DeskProfile) {
  auto c = PretrainConfig::desk();
  EXPECT_EQ(c.batch_size, 64);
  EXPECT_EQ(c.epochs, 50);
  EXPECT_EQ(c.encoder.input_side, 64);
  EXPECT_EQ(c.optimizer.kind, optim::OptimKind::lars);
  EXPECT_DOUBLE_EQ(c.optimizer.base_lr, 0.075);
  auto p = PretrainConfig::paper();
  EXPECT_EQ(p.batch_size, 512);
  EXPECT_EQ(p.encoder.input_side, 224);
  EXPECT_DOUBLE_EQ(p.optimizer.base_lr, 0.6);
}

TEST(Train, Validation) {
  auto c = tiny();
  c.batch_size = 7;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.temperature = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  EXPECT_THROW(pretrain(images(3), c), ConfigError);  // fewer than batch/2 images
}

TEST(Train, EpochOrderIsSeededPermutation) {
  auto a = epoch_order(50, 1, 0);
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 50u);
  EXPECT_EQ(a, epoch_order(50, 1, 0));
  EXPECT_NE(a, epoch_order(50, 1, 1));
  EXPECT_NE(a, epoch_order(50, 2, 0));
}

TEST(Train, ViewsMatchInputSide) {
  auto c = tiny();
  auto img = images(1)[0];
  auto [a, b] = training_views(img, c, 0, 0);
  EXPECT_EQ(a.width, 16);
  EXPECT_EQ(b.height, 16);
  auto [a2, b2] = training_views(img, c, 0, 0);
  EXPECT_EQ(a, a2);
  EXPECT_EQ(b, b2);
  EXPECT_NE(a, b);
}

TEST(Train, ZeroEpochsReturnsInitialModel) {
  auto c = tiny();
  c.epochs = 0;
  auto r = pretrain(images(8), c);
  EXPECT_EQ(r.steps, 0);
  EXPECT_TRUE(r.trace.empty());
  EXPECT_TRUE(same_params(r.model, model::Model::init(c.encoder, c.projection, c.seed)));
}

TEST(Train, StepCountDropsPartialBatch) {
  auto c = tiny();
  auto r = pretrain(images(11), c);  // 11 images, 4 per step -> 2 steps per epoch
  EXPECT_EQ(r.steps, 4);
  ASSERT_EQ(r.trace.size(), 2u);
  for (const auto& e : r.trace) EXPECT_TRUE(std::isfinite(e.mean_loss));
}

TEST(Train, DeterministicAndWorkerIndependent) {
  auto c = tiny();
  auto imgs = images(16);
  auto a = pretrain(imgs, c);
  c.workers = 3;
  c.queue_depth = 2;
  auto b = pretrain(imgs, c);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].mean_loss, b.trace[i].mean_loss);
  EXPECT_TRUE(same_params(a.model, b.model));
  c.seed = 6;
  auto d = pretrain(imgs, c);
  EXPECT_FALSE(same_params(a.model, d.model));
}

TEST(Train, IdenticalImagesGiveAnalyticLoss) {
  // every projection is the same row, so each anchor sees 2N-1 equal logits
  auto c = tiny();
  c.augment = augment::AugmentConfig::disabled();
  std::vector<RgbImage> same(8, images(1)[0]);
  auto r = pretrain(same, c);
  for (const auto& e : r.trace) EXPECT_NEAR(e.mean_loss, std::log(7.0), 1e-5);
}

TEST(Train, WritesCheckpointsAndTrace) {
  auto dir = temp_dir("artifacts");
  auto c = tiny();
  c.epochs = 3;
  auto r = pretrain(images(8), c, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint_e0001.sslh"));
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint_e0002.sslh"));
  EXPECT_FALSE(std::filesystem::exists(dir / "checkpoint_e0003.sslh"));
  EXPECT_TRUE(std::filesystem::exists(dir / "final.sslh"));
  const auto trace = slurp(dir / "loss_trace.csv");
  EXPECT_EQ(trace, format_loss_trace(r.trace));
  EXPECT_EQ(trace.rfind("epoch,mean_loss\n0,", 0), 0u);
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 4);
  EXPECT_TRUE(same_params(model::load_checkpoint(dir / "final.sslh"), r.model));
}

TEST(Train, TraceFormat) {
  EXPECT_EQ(format_loss_trace({{0, 4.0}, {1, 1.0 / 3.0}}), "epoch,mean_loss\n0,4\n1,0.333333333\n");
}

TEST(Train, NonFiniteLossKeepsLastGood) {
  auto dir = temp_dir("nan");
  auto c = tiny();
  c.epochs = 3;
  c.inject_nan_at_step = 4;  // 2 steps per epoch: fails at the start of epoch 2
  auto imgs = images(8);
  EXPECT_THROW(pretrain(imgs, c, dir), NumericError);
  ASSERT_TRUE(std::filesystem::exists(dir / "last_good.sslh"));
  EXPECT_FALSE(std::filesystem::exists(dir / "final.sslh"));
  auto ref = c;
  ref.inject_nan_at_step.reset();
  ref.epochs = 2;
  auto clean = pretrain(imgs, ref);
  EXPECT_TRUE(same_params(model::load_checkpoint(dir / "last_good.sslh"), clean.model));
}
