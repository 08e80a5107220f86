#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpath/features.hpp"
#include "cpath/image.hpp"
#include "cpath/model.hpp"

namespace cpath::eval {

enum class Task { classification, regression };

/// Per-item supervision. Classification uses labels in [0, num_classes);
/// regression uses values in [0, 100].
struct Targets {
  Task task = Task::classification;
  int num_classes = 2;
  std::vector<int> labels;
  std::vector<double> values;

  std::size_t size() const { return task == Task::classification ? labels.size() : values.size(); }
  void validate() const;
};

struct LabeledSet {
  std::vector<RgbImage> images;
  Targets targets;

  std::size_t size() const { return images.size(); }
  void validate() const;
};

struct SplitSpec {
  double train = 0.50;
  double val = 0.25;
  double test = 0.25;
  bool stratified = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Partition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Disjoint cover of [0, n). Part totals are round-half-even of n * fraction
/// (test takes the rest); stratified splits share each part across classes by
/// largest remainder. Classes with fewer than 4 members are pooled
/// unstratified with a warning. Every part is sorted ascending.
Partition split(const Targets& targets, const SplitSpec& spec);

/// round(|train| * percent / 100) items, stratified with at least one item per
/// class present; run_index selects an independent draw. Sorted ascending.
std::vector<std::size_t> subsample_labels(const Targets& targets, const std::vector<std::size_t>& train,
                                          double percent, int run_index, std::uint64_t seed);

/// Mean of per-class F1 = P*R / ((P+R)/2) over all K classes; zero
/// denominators contribute 0.
double macro_f1(std::span<const int> preds, std::span<const int> truth, int num_classes);

/// Mean absolute difference.
double l1_error(std::span<const double> preds, std::span<const double> truth);

enum class Mode { linear_probe, fine_tune };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

struct EvalProtocol {
  Mode mode = Mode::linear_probe;
  double label_percent = 100.0;
  int repeats = 5;
  int epochs = 100;
  int batch_size = 128;
  std::optional<double> lr;      // unset: 1e-2 for probes, 1e-4 for fine-tuning
  double weight_decay = 1e-5;    // small-encoder profile; 1e-4 for large encoders
  bool standardize = false;      // probe inputs scaled by training-subset mean/std
  bool cache_features = true;    // probe: encode once instead of every epoch
  bool resample_split = false;   // repeats redraw the split, not only the label subset
  std::uint64_t seed = 0;

  double learning_rate() const;
  void validate() const;
};

struct EvalReport {
  std::string metric_name;  // "macro_f1" (higher is better) or "l1" (lower is better)
  double test_metric = 0.0;
  double best_val_metric = 0.0;
  int best_epoch = -1;      // -1 when no epoch ran (untrained head)
  std::vector<double> val_history;
  std::vector<double> test_history;  // filled by probes only
};

/// Frozen linear probe on precomputed features. Trained with Adam on
/// cross-entropy (classification) or L1 (regression); the test metric of the
/// earliest epoch with the best validation metric is reported.
EvalReport probe_features(const FeatureMatrix& features, const Targets& targets, const Partition& parts,
                          const std::vector<std::size_t>& train_subset, const EvalProtocol& protocol,
                          std::uint64_t run_seed);

/// Probe on a frozen encoder. With cache_features the encoder runs once;
/// otherwise features are recomputed every epoch (same result, slower).
EvalReport linear_probe(const model::Model& encoder, const LabeledSet& set, const Partition& parts,
                        const std::vector<std::size_t>& train_subset, const EvalProtocol& protocol,
                        std::uint64_t run_seed);

/// Trains every encoder parameter plus a fresh linear head.
EvalReport fine_tune(const model::Model& encoder, const LabeledSet& set, const Partition& parts,
                     const std::vector<std::size_t>& train_subset, const EvalProtocol& protocol,
                     std::uint64_t run_seed);

/// One repetition of the protocol: split, label subset for run_index, then
/// probe or fine-tune.
EvalReport evaluate(const model::Model& encoder, const LabeledSet& set, const EvalProtocol& protocol,
                    int run_index);

struct ResultRow {
  std::string init;
  Mode mode = Mode::linear_probe;
  double percent = 100.0;
  std::string run;  // repetition index, or "mean" / "std" for aggregate rows
  std::uint64_t split_seed = 0;
  std::string metric_name;
  double value = 0.0;

  bool operator==(const ResultRow&) const = default;
};

struct NamedEncoder {
  std::string name;
  const model::Model* model = nullptr;
};

/// For every (init, percent) cell runs protocol.repeats repetitions and
/// appends one row per repetition followed by "mean" and sample "std" rows.
std::vector<ResultRow> sweep(const std::vector<NamedEncoder>& inits, const LabeledSet& set,
                             const std::vector<double>& percents, const EvalProtocol& protocol);

/// Appends mean and sample standard deviation rows for a block of run rows.
void append_aggregates(std::vector<ResultRow>& rows, std::size_t first, std::size_t last);

/// results.csv columns: init,mode,percent,run,split_seed,metric_name,value
std::string format_results_csv(const std::vector<ResultRow>& rows);
void write_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
/// Throws ParseError naming the offending row number.
std::vector<ResultRow> parse_results_csv(const std::string& text);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

/// Line chart of mean vs label percent per (init, mode) with std error bars,
/// built from the aggregate rows.
std::string render_sweep_svg(const std::vector<ResultRow>& rows);

}  // namespace cpath::eval
