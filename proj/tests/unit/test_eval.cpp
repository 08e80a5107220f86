#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "cpath/errors.hpp"
#include "cpath/eval.hpp"
#include "cpath/rng.hpp"

using namespace cpath;
using namespace cpath::eval;

namespace {

Targets class_targets(std::vector<int> labels, int k = 2) {
  Targets t;
  t.num_classes = k;
  t.labels = std::move(labels);
  return t;
}

Targets balanced(int n, int k = 2) {
  std::vector<int> l(n);
  for (int i = 0; i < n; ++i) l[i] = i % k;
  return class_targets(l, k);
}

// two Gaussian clouds in 8 dims, means 6 apart along every axis
FeatureMatrix clouds(const std::vector<int>& labels, std::uint64_t seed) {
  FeatureMatrix f{static_cast<std::int64_t>(labels.size()), 8, {}};
  RngStream rng{seed};
  for (int l : labels)
    for (int c = 0; c < 8; ++c) f.values.push_back(static_cast<float>(rng.normal() + (l ? 3.0 : -3.0)));
  return f;
}

LabeledSet color_set(int n, std::uint64_t seed) {
  LabeledSet s;
  RngStream rng{seed};
  for (int i = 0; i < n; ++i) {
    const int l = i % 2;
    RgbImage img(16, 16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const int jitter = static_cast<int>(rng.uniform_int(30));
        img.set(x, y, static_cast<std::uint8_t>(l ? 200 + jitter / 3 : 40 + jitter),
                static_cast<std::uint8_t>(90 + jitter), static_cast<std::uint8_t>(l ? 40 + jitter : 200 + jitter / 3));
      }
    s.images.push_back(img);
    s.targets.labels.push_back(l);
  }
  return s;
}

model::Model small_encoder(std::uint64_t seed) {
  model::EncoderConfig e;
  e.input_side = 16;
  e.stage_channels = {4, 8};
  model::ProjectionConfig p;
  p.out_dim = 4;
  return model::Model::init(e, p, seed);
}

EvalProtocol quick(Mode mode = Mode::linear_probe) {
  EvalProtocol p;
  p.mode = mode;
  p.epochs = 30;
  p.batch_size = 16;
  p.repeats = 2;
  return p;
}

}  // namespace

TEST(Split, FractionsAndDisjointness) {
  auto t = balanced(100);
  auto p = split(t, {});
  EXPECT_EQ(p.train.size(), 50u);
  EXPECT_EQ(p.val.size(), 25u);
  EXPECT_EQ(p.test.size(), 25u);
  std::set<std::size_t> all;
  for (auto* part : {&p.train, &p.val, &p.test}) {
    EXPECT_TRUE(std::is_sorted(part->begin(), part->end()));
    all.insert(part->begin(), part->end());
  }
  EXPECT_EQ(all.size(), 100u);
  int train_pos = 0;
  for (auto i : p.train) train_pos += t.labels[i];
  EXPECT_EQ(train_pos, 25);
}

TEST(Split, RoundHalfEven) {
  auto p = split(balanced(10), {});
  EXPECT_EQ(p.train.size(), 5u);
  EXPECT_EQ(p.val.size(), 2u);  // 2.5
  EXPECT_EQ(p.test.size(), 3u);
}

TEST(Split, CoverAcrossSizesAndSeeds) {
  RngStream rng{3};
  for (int t = 0; t < 40; ++t) {
    const int n = 8 + static_cast<int>(rng.uniform_int(300));
    const int k = 2 + static_cast<int>(rng.uniform_int(4));
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k)));
    SplitSpec s;
    s.seed = static_cast<std::uint64_t>(t);
    auto p = split(class_targets(labels, k), s);
    std::vector<int> seen(n, 0);
    for (auto* part : {&p.train, &p.val, &p.test})
      for (auto i : *part) seen[i]++;
    for (int c : seen) EXPECT_EQ(c, 1);
    EXPECT_EQ(p.train.size(), static_cast<std::size_t>(std::nearbyint(n * 0.5)));
  }
}

TEST(Split, SeedChangesAssignment) {
  auto t = balanced(60);
  SplitSpec a, b;
  b.seed = 1;
  EXPECT_NE(split(t, a).train, split(t, b).train);
  EXPECT_EQ(split(t, a).train, split(t, a).train);
}

TEST(Split, RejectsBadFractions) {
  SplitSpec s;
  s.train = 0.6;
  EXPECT_THROW(split(balanced(10), s), ConfigError);
}

TEST(Subsample, SizesAndClassCoverage) {
  auto t = balanced(400, 4);
  auto p = split(t, {});
  for (double pct : {1.0, 5.0, 10.0, 50.0, 100.0}) {
    auto sub = subsample_labels(t, p.train, pct, 0, 1);
    EXPECT_EQ(sub.size(), std::max<std::size_t>(4, static_cast<std::size_t>(std::nearbyint(200 * pct / 100))));
    std::set<int> classes;
    for (auto i : sub) {
      EXPECT_TRUE(std::binary_search(p.train.begin(), p.train.end(), i));
      classes.insert(t.labels[i]);
    }
    EXPECT_EQ(classes.size(), 4u);
  }
  EXPECT_NE(subsample_labels(t, p.train, 10, 0, 1), subsample_labels(t, p.train, 10, 1, 1));
  EXPECT_EQ(subsample_labels(t, p.train, 10, 2, 1), subsample_labels(t, p.train, 10, 2, 1));
}

TEST(MacroF1, Examples) {
  const std::vector<int> truth{0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(macro_f1(truth, truth, 2), 1.0);
  const std::vector<int> flipped{1, 0, 1, 0};
  EXPECT_DOUBLE_EQ(macro_f1(flipped, truth, 2), 0.0);
  const std::vector<int> zeros{0, 0, 0, 0};
  // class 0: P = 1/2, R = 1 -> 2/3; class 1 never predicted -> 0
  EXPECT_NEAR(macro_f1(zeros, truth, 2), 1.0 / 3.0, 1e-15);
  // absent class counts as zero
  EXPECT_NEAR(macro_f1(truth, truth, 3), 2.0 / 3.0, 1e-15);
}

TEST(MacroF1, MatchesConfusionOracle) {
  RngStream rng{8};
  for (int t = 0; t < 30; ++t) {
    const int k = 2 + t % 4;
    std::vector<int> p(200), y(200);
    for (int i = 0; i < 200; ++i) {
      y[i] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k)));
      p[i] = rng.uniform() < 0.6 ? y[i] : static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k)));
    }
    double sum = 0;
    for (int c = 0; c < k; ++c) {
      double tp = 0, fp = 0, fn = 0;
      for (int i = 0; i < 200; ++i) {
        tp += p[i] == c && y[i] == c;
        fp += p[i] == c && y[i] != c;
        fn += p[i] != c && y[i] == c;
      }
      sum += tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
    }
    EXPECT_NEAR(macro_f1(p, y, k), sum / k, 1e-12);
  }
}

TEST(MacroF1, RandomGuessingNearHalf) {
  RngStream rng{9};
  std::vector<int> p(20000), y(20000);
  for (int i = 0; i < 20000; ++i) {
    y[i] = i % 2;
    p[i] = static_cast<int>(rng.uniform_int(2));
  }
  EXPECT_NEAR(macro_f1(p, y, 2), 0.5, 0.02);
}

TEST(L1, Examples) {
  const std::vector<double> a{10, 20, 30}, b{12, 20, 27};
  EXPECT_DOUBLE_EQ(l1_error(a, b), 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(l1_error(a, a), 0.0);
}

TEST(Protocol, LearningRateDependsOnMode) {
  EvalProtocol p;
  EXPECT_DOUBLE_EQ(p.learning_rate(), 1e-2);
  p.mode = Mode::fine_tune;
  EXPECT_DOUBLE_EQ(p.learning_rate(), 1e-4);
  p.lr = 0.5;
  EXPECT_DOUBLE_EQ(p.learning_rate(), 0.5);
  p.repeats = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_EQ(parse_mode(to_string(Mode::fine_tune)), Mode::fine_tune);
}

TEST(Probe, SeparableFeatures) {
  auto t = balanced(200);
  auto f = clouds(t.labels, 1);
  auto parts = split(t, {});
  auto r = probe_features(f, t, parts, parts.train, quick(), 4);
  EXPECT_GE(r.test_metric, 0.99);
  EXPECT_EQ(r.metric_name, "macro_f1");
  EXPECT_EQ(r.val_history.size(), 30u);
  EXPECT_EQ(r.test_history.size(), 30u);
  EXPECT_DOUBLE_EQ(r.test_metric, r.test_history[static_cast<std::size_t>(r.best_epoch)]);
  // earliest epoch holding the best validation score
  const double best = *std::max_element(r.val_history.begin(), r.val_history.end());
  EXPECT_EQ(r.best_epoch, std::find(r.val_history.begin(), r.val_history.end(), best) - r.val_history.begin());
}

TEST(Probe, PermutedLabelsStayNearChance) {
  auto t = balanced(400);
  auto f = clouds(t.labels, 2);
  RngStream rng{5};
  for (std::size_t i = t.labels.size(); i > 1; --i) std::swap(t.labels[i - 1], t.labels[rng.uniform_int(i)]);
  auto parts = split(t, {});
  auto r = probe_features(f, t, parts, parts.train, quick(), 4);
  EXPECT_LT(r.test_metric, 0.65);
}

TEST(Probe, Regression) {
  Targets t;
  t.task = Task::regression;
  FeatureMatrix f{300, 3, {}};
  RngStream rng{6};
  for (int i = 0; i < 300; ++i) {
    const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
    f.values.insert(f.values.end(), {static_cast<float>(a), static_cast<float>(b), static_cast<float>(c)});
    t.values.push_back(20 + 50 * a + 20 * b);
  }
  SplitSpec s;
  s.stratified = false;
  auto parts = split(t, s);
  auto p = quick();
  p.epochs = 200;
  p.lr = 1e-2;
  auto r = probe_features(f, t, parts, parts.train, p, 1);
  EXPECT_EQ(r.metric_name, "l1");
  EXPECT_LE(r.test_metric, 0.5);
}

TEST(Probe, ArgmaxIsScaleInvariant) {
  auto t = balanced(100);
  auto f = clouds(t.labels, 3);
  auto scaled = f;
  auto parts = split(t, {});
  auto p = quick();
  p.standardize = true;
  for (auto& v : scaled.values) v *= 4.0f;
  // standardization removes the scale, so the runs coincide
  EXPECT_NEAR(probe_features(f, t, parts, parts.train, p, 2).test_metric,
              probe_features(scaled, t, parts, parts.train, p, 2).test_metric, 1e-9);
}

TEST(Probe, DeterministicAndCacheEquivalent) {
  auto set = color_set(48, 1);
  auto enc = small_encoder(3);
  auto parts = split(set.targets, {});
  auto p = quick();
  p.epochs = 5;
  auto a = linear_probe(enc, set, parts, parts.train, p, 7);
  auto b = linear_probe(enc, set, parts, parts.train, p, 7);
  EXPECT_EQ(a.val_history, b.val_history);
  p.cache_features = false;
  auto c = linear_probe(enc, set, parts, parts.train, p, 7);
  EXPECT_EQ(a.val_history, c.val_history);
  EXPECT_EQ(a.test_metric, c.test_metric);
}

TEST(Probe, SeparableImages) {
  auto set = color_set(120, 2);
  auto enc = small_encoder(4);
  EvalProtocol p = quick();
  auto r = evaluate(enc, set, p, 0);
  EXPECT_GE(r.test_metric, 0.99);
}

TEST(FineTune, ZeroEpochsLeavesHeadUntrained) {
  auto set = color_set(40, 3);
  auto enc = small_encoder(5);
  auto parts = split(set.targets, {});
  auto p = quick(Mode::fine_tune);
  p.epochs = 0;
  auto r = fine_tune(enc, set, parts, parts.train, p, 1);
  EXPECT_EQ(r.best_epoch, -1);
  EXPECT_TRUE(r.val_history.empty());
  EXPECT_GE(r.test_metric, 0.0);
  EXPECT_LE(r.test_metric, 1.0);
}

TEST(FineTune, LearnsAndLeavesEncoderIntact) {
  auto set = color_set(80, 4);
  auto enc = small_encoder(6);
  auto before = enc.clone();
  auto p = quick(Mode::fine_tune);
  p.epochs = 15;
  p.lr = 3e-3;
  auto r = evaluate(enc, set, p, 0);
  EXPECT_GE(r.test_metric, 0.9);
  for (std::size_t i = 0; i < enc.params().size(); ++i) {
    auto x = enc.params()[i].value.data();
    auto y = before.params()[i].value.data();
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
  }
  auto again = evaluate(enc, set, p, 0);
  EXPECT_EQ(r.val_history, again.val_history);
}

TEST(Sweep, RowsAndAggregates) {
  auto set = color_set(40, 5);
  auto a = small_encoder(1), b = small_encoder(2);
  auto p = quick();
  p.epochs = 2;
  p.repeats = 3;
  auto rows = sweep({{"pre", &a}, {"rand", &b}}, set, {50.0, 100.0}, p);
  ASSERT_EQ(rows.size(), 2u * 2u * 5u);
  for (std::size_t cell = 0; cell < 4; ++cell) {
    const auto* r = &rows[cell * 5];
    EXPECT_EQ(r[0].run, "0");
    EXPECT_EQ(r[2].run, "2");
    EXPECT_EQ(r[3].run, "mean");
    EXPECT_EQ(r[4].run, "std");
    const double mean = (r[0].value + r[1].value + r[2].value) / 3;
    double ss = 0;
    for (int i = 0; i < 3; ++i) ss += (r[i].value - mean) * (r[i].value - mean);
    EXPECT_NEAR(r[3].value, mean, 1e-12);
    EXPECT_NEAR(r[4].value, std::sqrt(ss / 2), 1e-12);
  }
  EXPECT_EQ(rows[0].init, "pre");
  EXPECT_EQ(rows[10].init, "rand");
}

TEST(Sweep, AggregateOfSingleRunHasZeroStd) {
  std::vector<ResultRow> rows{{"x", Mode::linear_probe, 10, "0", 0, "macro_f1", 0.7}};
  append_aggregates(rows, 0, 1);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_DOUBLE_EQ(rows[1].value, 0.7);
  EXPECT_DOUBLE_EQ(rows[2].value, 0.0);
}

TEST(ResultsCsv, RoundTrip) {
  std::vector<ResultRow> rows{{"pretrained", Mode::linear_probe, 10, "0", 3, "macro_f1", 0.91234567891},
                              {"random", Mode::fine_tune, 5, "mean", 3, "macro_f1", 1.0 / 3.0},
                              {"random", Mode::fine_tune, 5, "std", 3, "l1", 0.0}};
  const auto text = format_results_csv(rows);
  EXPECT_EQ(text.substr(0, text.find('\n')), "init,mode,percent,run,split_seed,metric_name,value");
  EXPECT_EQ(format_results_csv(parse_results_csv(text)), text);
  auto back = parse_results_csv(text);
  EXPECT_EQ(back[1].run, "mean");
  EXPECT_NEAR(back[1].value, 1.0 / 3.0, 1e-9);
}

TEST(ResultsCsv, MalformedRowIsNamed) {
  const std::string good = "init,mode,percent,run,split_seed,metric_name,value\nx,linear_probe,10,0,0,macro_f1,0.5\n";
  try {
    parse_results_csv(good + "x,linear_probe,ten,0,0,macro_f1,0.5\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_results_csv("bogus\n"), ParseError);
  EXPECT_THROW(parse_results_csv(good + "x,linear_probe,10,0\n"), ParseError);
}

TEST(Svg, DeterministicAndWellFormed) {
  std::vector<ResultRow> rows{{"pre", Mode::linear_probe, 10, "0", 0, "macro_f1", 0.8},
                              {"pre", Mode::linear_probe, 10, "1", 0, "macro_f1", 0.9}};
  append_aggregates(rows, 0, 2);
  const auto svg = render_sweep_svg(rows);
  EXPECT_EQ(svg, render_sweep_svg(rows));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("pre"), std::string::npos);
}
