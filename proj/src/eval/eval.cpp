#include "cpath/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include <spdlog/spdlog.h>

#include "cpath/errors.hpp"
#include "cpath/ops.hpp"
#include "cpath/optim.hpp"
#include "cpath/rng.hpp"

namespace cpath::eval {

namespace {

constexpr std::uint64_t kPooledGroup = 0xFFFFFFFFull;

std::int64_t round_half_even(double v) {
  return static_cast<std::int64_t>(std::nearbyint(v));
}

void shuffle(std::vector<std::size_t>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(rng.uniform_int(i))]);
}

// Integer shares of `total` close to `ideal`, never above `cap` and never
// below `floor_min`. Leftover units go to the largest fractional remainders,
// lowest index first on ties.
std::vector<std::int64_t> allocate(const std::vector<double>& ideal, std::int64_t total,
                                   const std::vector<std::int64_t>& cap, std::int64_t floor_min = 0) {
  const std::size_t g = ideal.size();
  std::vector<std::int64_t> share(g);
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < g; ++i) {
    share[i] = std::min(cap[i], std::max(floor_min, static_cast<std::int64_t>(std::floor(ideal[i]))));
    sum += share[i];
  }
  while (sum > total) {
    std::size_t best = g;
    for (std::size_t i = 0; i < g; ++i)
      if (share[i] > floor_min && (best == g || share[i] > share[best])) best = i;
    if (best == g) break;
    --share[best];
    --sum;
  }
  while (sum < total) {
    std::size_t best = g;
    double best_rem = -1e300;
    for (std::size_t i = 0; i < g; ++i) {
      if (share[i] >= cap[i]) continue;
      const double rem = ideal[i] - static_cast<double>(share[i]);
      if (rem > best_rem) {
        best_rem = rem;
        best = i;
      }
    }
    if (best == g) break;
    ++share[best];
    ++sum;
  }
  return share;
}

struct Group {
  std::uint64_t key;
  std::vector<std::size_t> members;
};

std::vector<Group> class_groups(const Targets& t, const std::vector<std::size_t>& items, bool stratified,
                                std::size_t min_members) {
  if (t.task != Task::classification || !stratified) return {{kPooledGroup, items}};
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i : items) by_class[t.labels[i]].push_back(i);
  std::vector<Group> groups;
  Group pooled{kPooledGroup, {}};
  for (auto& [label, members] : by_class) {
    if (members.size() < min_members) {
      spdlog::warn("class {} has only {} members; it is split without stratification", label, members.size());
      pooled.members.insert(pooled.members.end(), members.begin(), members.end());
    } else {
      groups.push_back({static_cast<std::uint64_t>(label), std::move(members)});
    }
  }
  if (!pooled.members.empty()) {
    std::sort(pooled.members.begin(), pooled.members.end());
    groups.push_back(std::move(pooled));
  }
  return groups;
}

int argmax_row(std::span<const double> row) {
  int best = 0;
  for (std::size_t k = 1; k < row.size(); ++k)
    if (row[k] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  return best;
}

template <typename T>
double score(const Targets& t, const std::vector<std::size_t>& items, const std::vector<T>& outputs, int width) {
  if (t.task == Task::classification) {
    std::vector<int> preds(items.size()), truth(items.size());
    std::vector<double> row(static_cast<std::size_t>(width));
    for (std::size_t i = 0; i < items.size(); ++i) {
      for (int k = 0; k < width; ++k) row[static_cast<std::size_t>(k)] = outputs[i * width + k];
      preds[i] = argmax_row(row);
      truth[i] = t.labels[items[i]];
    }
    return macro_f1(preds, truth, t.num_classes);
  }
  std::vector<double> preds(items.size()), truth(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    preds[i] = 100.0 * static_cast<double>(outputs[i]);
    truth[i] = t.values[items[i]];
  }
  return l1_error(preds, truth);
}

bool better(const Targets& t, double candidate, double incumbent) {
  return t.task == Task::classification ? candidate > incumbent : candidate < incumbent;
}

double median_target(const Targets& t, const std::vector<std::size_t>& items) {
  std::vector<double> v;
  for (std::size_t i : items) v.push_back(t.values[i] / 100.0);
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

template <typename T>
tg::Tensor<T> task_loss(const tg::Tensor<T>& out, const Targets& t, const std::vector<std::size_t>& items) {
  if (t.task == Task::classification) {
    std::vector<int> labels;
    for (std::size_t i : items) labels.push_back(t.labels[i]);
    return tg::softmax_cross_entropy(out, labels);
  }
  std::vector<T> target;
  for (std::size_t i : items) target.push_back(static_cast<T>(t.values[i] / 100.0));
  return tg::l1_loss(out, std::span<const T>(target));
}

template <typename T>
std::pair<tg::Tensor<T>, tg::Tensor<T>> make_head(std::int64_t in, const Targets& t,
                                                  const std::vector<std::size_t>& train, std::uint64_t run_seed) {
  const std::int64_t out = t.task == Task::classification ? t.num_classes : 1;
  std::vector<T> w(static_cast<std::size_t>(in * out));
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  RngStream rng{run_seed, 0x68656164ull /* "head" */};
  for (auto& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
  std::vector<T> b(static_cast<std::size_t>(out), T(0));
  // Regression heads predict a fraction of 100 and start at the median target.
  if (t.task == Task::regression) b[0] = static_cast<T>(median_target(t, train));
  return {tg::Tensor<T>::from({in, out}, std::move(w), true), tg::Tensor<T>::from({out}, std::move(b), true)};
}

const char* metric_name(const Targets& t) {
  return t.task == Task::classification ? "macro_f1" : "l1";
}

// Shared epoch loop: `fit_epoch` runs one pass over the shuffled training
// subset, `outputs(items)` evaluates the current model.
template <typename Fit, typename Outputs>
EvalReport run_epochs(const Targets& t, const Partition& parts, const std::vector<std::size_t>& train_subset,
                      const EvalProtocol& p, std::uint64_t run_seed, int width, bool test_every_epoch, Fit fit_epoch,
                      Outputs outputs) {
  EvalReport report;
  report.metric_name = metric_name(t);
  if (p.epochs == 0) {
    report.best_val_metric = score(t, parts.val, outputs(parts.val), width);
    report.test_metric = score(t, parts.test, outputs(parts.test), width);
    return report;
  }
  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    std::vector<std::size_t> order = train_subset;
    RngStream rng{run_seed, static_cast<std::uint64_t>(epoch), 0x65706F6368ull /* "epoch" */};
    shuffle(order, rng);
    fit_epoch(order);
    const double val = score(t, parts.val, outputs(parts.val), width);
    report.val_history.push_back(val);
    const bool improved = report.best_epoch < 0 || better(t, val, report.best_val_metric);
    double test = 0.0;
    if (test_every_epoch || improved) test = score(t, parts.test, outputs(parts.test), width);
    if (test_every_epoch) report.test_history.push_back(test);
    if (improved) {
      report.best_epoch = epoch;
      report.best_val_metric = val;
      report.test_metric = test;
    }
  }
  return report;
}

optim::OptimConfig adam_config(const EvalProtocol& p) {
  optim::OptimConfig c;
  c.kind = optim::OptimKind::adam;
  c.base_lr = p.learning_rate();
  c.weight_decay = p.weight_decay;
  return c;
}

void check_parts(const Targets& t, const Partition& parts, const std::vector<std::size_t>& train_subset) {
  const std::size_t n = t.size();
  for (const auto* v : {&parts.train, &parts.val, &parts.test, &train_subset})
    for (std::size_t i : *v)
      if (i >= n) throw ContractError("partition index " + std::to_string(i) + " out of range");
  if (train_subset.empty()) throw ContractError("training subset is empty");
  if (parts.val.empty() || parts.test.empty()) throw ContractError("validation and test parts must be non-empty");
}

}  // namespace

void Targets::validate() const {
  if (task == Task::classification) {
    if (num_classes < 2) throw ContractError("classification needs at least 2 classes");
    for (int l : labels)
      if (l < 0 || l >= num_classes) throw ContractError("label " + std::to_string(l) + " outside [0, K)");
  } else {
    for (double v : values)
      if (!(v >= 0.0 && v <= 100.0)) throw ContractError("regression target outside [0, 100]");
  }
}

void LabeledSet::validate() const {
  targets.validate();
  if (targets.size() != images.size()) throw ContractError("labeled set has mismatched image and target counts");
}

void SplitSpec::validate() const {
  if (train <= 0 || val <= 0 || test <= 0) throw ConfigError("split fractions must be positive");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

Partition split(const Targets& targets, const SplitSpec& spec) {
  spec.validate();
  targets.validate();
  const std::size_t n = targets.size();
  if (n < 8) throw ContractError("split needs at least 8 items, got " + std::to_string(n));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  auto groups = class_groups(targets, all, spec.stratified, 4);

  std::vector<double> ideal_train, ideal_val;
  std::vector<std::int64_t> cap;
  for (auto& g : groups) {
    RngStream rng{spec.seed, g.key, 0x73706C6974ull /* "split" */};
    shuffle(g.members, rng);
    ideal_train.push_back(static_cast<double>(g.members.size()) * spec.train);
    ideal_val.push_back(static_cast<double>(g.members.size()) * spec.val);
    cap.push_back(static_cast<std::int64_t>(g.members.size()));
  }
  const auto n_train = allocate(ideal_train, round_half_even(static_cast<double>(n) * spec.train), cap);
  for (std::size_t i = 0; i < cap.size(); ++i) cap[i] -= n_train[i];
  const auto n_val = allocate(ideal_val, round_half_even(static_cast<double>(n) * spec.val), cap);

  Partition parts;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& m = groups[gi].members;
    const auto a = static_cast<std::size_t>(n_train[gi]);
    const auto b = a + static_cast<std::size_t>(n_val[gi]);
    parts.train.insert(parts.train.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(a));
    parts.val.insert(parts.val.end(), m.begin() + static_cast<std::ptrdiff_t>(a), m.begin() + static_cast<std::ptrdiff_t>(b));
    parts.test.insert(parts.test.end(), m.begin() + static_cast<std::ptrdiff_t>(b), m.end());
  }
  std::sort(parts.train.begin(), parts.train.end());
  std::sort(parts.val.begin(), parts.val.end());
  std::sort(parts.test.begin(), parts.test.end());
  return parts;
}

std::vector<std::size_t> subsample_labels(const Targets& targets, const std::vector<std::size_t>& train,
                                          double percent, int run_index, std::uint64_t seed) {
  if (!(percent > 0.0 && percent <= 100.0)) throw ContractError("label percent must lie in (0, 100]");
  if (train.empty()) return {};
  auto groups = class_groups(targets, train, true, 1);
  std::int64_t m = round_half_even(static_cast<double>(train.size()) * percent / 100.0);
  m = std::max<std::int64_t>(m, static_cast<std::int64_t>(groups.size()));
  m = std::min<std::int64_t>(m, static_cast<std::int64_t>(train.size()));

  std::vector<double> ideal;
  std::vector<std::int64_t> cap;
  for (auto& g : groups) {
    RngStream rng{seed, static_cast<std::uint64_t>(run_index), g.key, 0x737562ull /* "sub" */};
    shuffle(g.members, rng);
    ideal.push_back(static_cast<double>(g.members.size()) * static_cast<double>(m) / static_cast<double>(train.size()));
    cap.push_back(static_cast<std::int64_t>(g.members.size()));
  }
  const auto share = allocate(ideal, m, cap, 1);
  std::vector<std::size_t> out;
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    out.insert(out.end(), groups[gi].members.begin(),
               groups[gi].members.begin() + static_cast<std::ptrdiff_t>(share[gi]));
  std::sort(out.begin(), out.end());
  return out;
}

double macro_f1(std::span<const int> preds, std::span<const int> truth, int num_classes) {
  if (preds.size() != truth.size()) throw ContractError("macro_f1: prediction and truth lengths differ");
  if (num_classes < 1) throw ContractError("macro_f1 needs at least one class");
  std::vector<std::int64_t> tp(static_cast<std::size_t>(num_classes)), fp(tp), fn(tp);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], t = truth[i];
    if (p < 0 || p >= num_classes || t < 0 || t >= num_classes) throw ContractError("macro_f1: label out of range");
    if (p == t) {
      ++tp[static_cast<std::size_t>(p)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(t)];
    }
  }
  double total = 0.0;
  for (std::size_t k = 0; k < tp.size(); ++k) {
    const double tpk = static_cast<double>(tp[k]);
    const double precision = tp[k] + fp[k] > 0 ? tpk / static_cast<double>(tp[k] + fp[k]) : 0.0;
    const double recall = tp[k] + fn[k] > 0 ? tpk / static_cast<double>(tp[k] + fn[k]) : 0.0;
    const double denom = (precision + recall) / 2.0;
    total += denom > 0.0 ? precision * recall / denom : 0.0;
  }
  return total / num_classes;
}

double l1_error(std::span<const double> preds, std::span<const double> truth) {
  if (preds.size() != truth.size()) throw ContractError("l1_error: prediction and truth lengths differ");
  if (preds.empty()) throw ContractError("l1_error: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += std::abs(truth[i] - preds[i]);
  return s / static_cast<double>(preds.size());
}

std::string to_string(Mode m) {
  return m == Mode::fine_tune ? "fine_tune" : "linear_probe";
}

Mode parse_mode(const std::string& s) {
  if (s == "linear_probe") return Mode::linear_probe;
  if (s == "fine_tune") return Mode::fine_tune;
  throw ConfigError("unknown evaluation mode '" + s + "' (expected linear_probe or fine_tune)");
}

double EvalProtocol::learning_rate() const {
  if (lr) return *lr;
  return mode == Mode::fine_tune ? 1e-4 : 1e-2;
}

void EvalProtocol::validate() const {
  if (!(label_percent > 0.0 && label_percent <= 100.0)) throw ConfigError("label_percent must lie in (0, 100]");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate() > 0.0)) throw ConfigError("learning rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
}

namespace {

// Linear probe over features supplied by `provide`, which is called once per
// epoch (and once up front) and returns the current feature matrix.
EvalReport probe_impl(const std::function<const FeatureMatrix&()>& provide, const Targets& t, const Partition& parts,
                      const std::vector<std::size_t>& train_subset, const EvalProtocol& p, std::uint64_t run_seed) {
  p.validate();
  t.validate();
  check_parts(t, parts, train_subset);
  const FeatureMatrix* features = &provide();
  if (static_cast<std::size_t>(features->rows) != t.size()) throw ContractError("feature rows and targets differ");
  const std::int64_t d = features->cols;

  std::vector<double> mu(static_cast<std::size_t>(d), 0.0), sd(static_cast<std::size_t>(d), 1.0);
  auto fit_scaler = [&] {
    if (!p.standardize) return;
    const auto& f = features->values;
    const double n = static_cast<double>(train_subset.size());
    for (std::int64_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t i : train_subset) s += f[i * d + j];
      const double m = s / n;
      double v = 0.0;
      for (std::size_t i : train_subset) v += (f[i * d + j] - m) * (f[i * d + j] - m);
      v /= n;
      mu[j] = m;
      sd[j] = v > 0.0 ? std::sqrt(v) : 1.0;
    }
  };
  fit_scaler();
  auto gather = [&](const std::vector<std::size_t>& items) {
    const auto& f = features->values;
    std::vector<double> x(items.size() * static_cast<std::size_t>(d));
    for (std::size_t r = 0; r < items.size(); ++r)
      for (std::int64_t j = 0; j < d; ++j) x[r * d + j] = (f[items[r] * d + j] - mu[j]) / sd[j];
    return tg::Tensor<double>::from({static_cast<std::int64_t>(items.size()), d}, std::move(x));
  };

  auto [w, b] = make_head<double>(d, t, train_subset, run_seed);
  const int width = static_cast<int>(w.dim(1));
  optim::Optimizer<double> opt(adam_config(p), {{w, false}, {b, true}});

  bool first_epoch = true;
  auto fit_epoch = [&](const std::vector<std::size_t>& order) {
    if (!first_epoch) {
      features = &provide();
      fit_scaler();
    }
    first_epoch = false;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(p.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(p.batch_size));
      const std::vector<std::size_t> items(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      w.zero_grad();
      b.zero_grad();
      tg::backward(task_loss(tg::linear(gather(items), w, b), t, items));
      opt.step();
    }
  };
  auto outputs = [&](const std::vector<std::size_t>& items) {
    tg::NoGradGuard guard;
    auto out = tg::linear(gather(items), w, b);
    return std::vector<double>(out.data().begin(), out.data().end());
  };
  return run_epochs(t, parts, train_subset, p, run_seed, width, true, fit_epoch, outputs);
}

}  // namespace

EvalReport probe_features(const FeatureMatrix& features, const Targets& t, const Partition& parts,
                          const std::vector<std::size_t>& train_subset, const EvalProtocol& p,
                          std::uint64_t run_seed) {
  return probe_impl([&]() -> const FeatureMatrix& { return features; }, t, parts, train_subset, p, run_seed);
}

EvalReport linear_probe(const model::Model& encoder, const LabeledSet& set, const Partition& parts,
                        const std::vector<std::size_t>& train_subset, const EvalProtocol& protocol,
                        std::uint64_t run_seed) {
  set.validate();
  FeatureMatrix current;
  bool encoded = false;
  auto provide = [&]() -> const FeatureMatrix& {
    if (!protocol.cache_features || !encoded) {
      current = encode_features(encoder, set.images);
      encoded = true;
    }
    return current;
  };
  return probe_impl(provide, set.targets, parts, train_subset, protocol, run_seed);
}

EvalReport fine_tune(const model::Model& encoder, const LabeledSet& set, const Partition& parts,
                     const std::vector<std::size_t>& train_subset, const EvalProtocol& p, std::uint64_t run_seed) {
  p.validate();
  set.validate();
  const Targets& t = set.targets;
  check_parts(t, parts, train_subset);
  model::Model net = encoder.clone();
  net.set_requires_grad(true);
  auto [w, b] = make_head<float>(net.encoder_config().feature_dim(), t, train_subset, run_seed);
  const int width = static_cast<int>(w.dim(1));
  std::vector<optim::Slot<float>> slots = optim::slots_of(net.encoder_params());
  slots.push_back({w, false});
  slots.push_back({b, true});
  optim::Optimizer<float> opt(adam_config(p), slots);

  auto batch_of = [&](const std::vector<std::size_t>& items) {
    std::vector<RgbImage> imgs;
    imgs.reserve(items.size());
    for (std::size_t i : items) imgs.push_back(set.images[i]);
    return model::images_to_tensor<float>(imgs);
  };
  auto fit_epoch = [&](const std::vector<std::size_t>& order) {
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(p.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(p.batch_size));
      const std::vector<std::size_t> items(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      net.zero_grad();
      w.zero_grad();
      b.zero_grad();
      tg::backward(task_loss(tg::linear(net.encode(batch_of(items)), w, b), t, items));
      opt.step();
    }
  };
  auto outputs = [&](const std::vector<std::size_t>& items) {
    tg::NoGradGuard guard;
    std::vector<float> out;
    for (std::size_t begin = 0; begin < items.size(); begin += 64) {
      const std::size_t end = std::min(items.size(), begin + 64);
      const std::vector<std::size_t> chunk(items.begin() + static_cast<std::ptrdiff_t>(begin),
                                           items.begin() + static_cast<std::ptrdiff_t>(end));
      auto y = tg::linear(net.encode(batch_of(chunk)), w, b);
      out.insert(out.end(), y.data().begin(), y.data().end());
    }
    return out;
  };
  return run_epochs(t, parts, train_subset, p, run_seed, width, false, fit_epoch, outputs);
}

EvalReport evaluate(const model::Model& encoder, const LabeledSet& set, const EvalProtocol& p, int run_index) {
  p.validate();
  SplitSpec spec;
  spec.stratified = set.targets.task == Task::classification;
  spec.seed = p.resample_split ? mix64(p.seed ^ mix64(static_cast<std::uint64_t>(run_index) + 1)) : p.seed;
  const Partition parts = split(set.targets, spec);
  const auto subset = subsample_labels(set.targets, parts.train, p.label_percent, run_index, p.seed);
  const std::uint64_t run_seed = mix64(p.seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(run_index + 1));
  return p.mode == Mode::fine_tune ? fine_tune(encoder, set, parts, subset, p, run_seed)
                                   : linear_probe(encoder, set, parts, subset, p, run_seed);
}

}  // namespace cpath::eval
