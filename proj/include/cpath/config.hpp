#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cpath/cluster.hpp"
#include "cpath/data.hpp"
#include "cpath/eval.hpp"
#include "cpath/train.hpp"

namespace cpath::config {

/// Scalar or flat array value of the TOML subset understood here: strings,
/// integers, floats, booleans and one-level arrays of those.
struct Value {
  using Scalar = std::variant<std::string, std::int64_t, double, bool>;
  Scalar scalar;
  std::optional<std::vector<Scalar>> array;
  int line = 0;
};

/// section -> key -> value; top-level keys live in section "".
using Document = std::map<std::string, std::map<std::string, Value>>;

/// Parses "[section]" headers, "key = value" lines and '#' comments. Throws
/// ParseError with the line number on anything else, including duplicate keys.
Document parse_toml(const std::string& text);

struct RunConfig {
  std::uint64_t seed = 0;
  std::string profile = "desk";
  train::PretrainConfig pretrain = train::PretrainConfig::desk();
  data::SamplingPolicy sampling;
  eval::EvalProtocol eval;
  std::vector<double> eval_percents{5, 10, 20, 50, 100};
  cluster::KMeansOptions cluster;
  std::vector<int> elbow_ks;

  /// Copies the global seed into every section that draws random numbers.
  void propagate_seed();
  void validate() const;
};

/// Builds a config from a document. Unknown sections or keys and values of
/// the wrong type are ConfigErrors. "pretrain.profile" selects the defaults
/// the remaining keys override; without "optim.lr" the learning rate follows
/// the batch-size formula of the chosen optimizer.
RunConfig from_document(const Document& doc);
RunConfig load(const std::filesystem::path& path);

/// Every field materialized, in a form from_document accepts.
std::string to_toml(const RunConfig& cfg, bool with_workers = true);
/// Leaves out pretrain.workers: it never changes results, so runs that differ
/// only in thread count write identical files.
void write_resolved(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace cpath::config
