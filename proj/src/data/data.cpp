#include "cpath/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "cpath/errors.hpp"
#include "cpath/rng.hpp"

namespace cpath::data {

namespace {

using nlohmann::json;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Draws k of the indices [0, n) without replacement; the draw order is kept.
std::vector<std::size_t> choose(std::size_t n, std::size_t k, RngStream& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

std::string to_string(SourceKind k) {
  return k == SourceKind::wsi ? "wsi" : "patch";
}

SourceKind parse_source_kind(const std::string& s) {
  if (s == "wsi") return SourceKind::wsi;
  if (s == "patch") return SourceKind::patch;
  throw ParseError("unknown dataset kind '" + s + "' (expected patch or wsi)");
}

std::string manifest_line(const DatasetManifest& d, const ManifestEntry& e) {
  json j;
  j["dataset_id"] = d.dataset_id;
  j["kind"] = to_string(d.kind);
  j["organ"] = d.organ;
  j["stain"] = d.stain;
  j["resolution"] = to_string(d.resolution);
  j["path"] = e.path;
  j["source_id"] = e.source_id;
  j["x"] = e.x;
  j["y"] = e.y;
  return j.dump();
}

ManifestCollection parse_manifest_text(const std::string& text, const std::string& origin) {
  ManifestCollection out;
  std::unordered_map<std::string, std::size_t> index;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    DatasetManifest tags;
    ManifestEntry entry;
    try {
      const json j = json::parse(line);
      if (!j.is_object()) throw ParseError(where + ": expected a JSON object");
      static const std::set<std::string> known{"dataset_id", "kind", "organ", "stain", "resolution",
                                               "path", "source_id", "x", "y"};
      for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw ParseError(where + ": unknown field '" + key + "'");
      }
      tags.dataset_id = j.at("dataset_id").get<std::string>();
      tags.kind = parse_source_kind(j.at("kind").get<std::string>());
      tags.organ = j.value("organ", std::string("unknown"));
      tags.stain = j.value("stain", std::string("unknown"));
      tags.resolution = parse_resolution(j.value("resolution", std::string("unknown")));
      entry.path = j.at("path").get<std::string>();
      entry.source_id = j.value("source_id", entry.path);
      entry.x = j.value("x", 0);
      entry.y = j.value("y", 0);
    } catch (const json::exception& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      throw ParseError(msg.rfind(where, 0) == 0 ? msg : where + ": " + msg);
    }
    if (tags.dataset_id.empty()) throw ParseError(where + ": empty dataset_id");
    auto it = index.find(tags.dataset_id);
    if (it == index.end()) {
      index.emplace(tags.dataset_id, out.size());
      out.push_back(tags);
      it = index.find(tags.dataset_id);
    }
    auto& dataset = out[it->second];
    if (dataset.kind != tags.kind || dataset.organ != tags.organ || dataset.stain != tags.stain ||
        dataset.resolution != tags.resolution) {
      throw ParseError(where + ": tags of dataset '" + tags.dataset_id + "' disagree with earlier lines");
    }
    dataset.entries.push_back(std::move(entry));
  }
  return out;
}

ManifestCollection load_manifests(const std::vector<std::filesystem::path>& paths) {
  ManifestCollection all;
  std::unordered_set<std::string> ids;
  for (const auto& path : paths) {
    for (auto& dataset : parse_manifest_text(read_text(path), path.string())) {
      if (!ids.insert(dataset.dataset_id).second) {
        throw ParseError("dataset_id '" + dataset.dataset_id + "' appears in more than one manifest (" +
                         path.string() + ")");
      }
      all.push_back(std::move(dataset));
    }
  }
  return all;
}

void write_manifest(const std::filesystem::path& path, const ManifestCollection& collection) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& d : collection)
    for (const auto& e : d.entries) out << manifest_line(d, e) << '\n';
}

std::int64_t percentage_quota(std::int64_t available, double percent, std::int64_t minimum, std::int64_t maximum) {
  if (available < 0) throw ContractError("available count must be non-negative");
  const double raw = std::nearbyint(static_cast<double>(available) * percent / 100.0);
  auto quota = static_cast<std::int64_t>(raw);
  quota = std::clamp(quota, minimum, maximum);
  return std::min(quota, available);
}

std::vector<ManifestEntry> cap_per_source(const DatasetManifest& dataset, std::int64_t cap, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_source;
  for (std::size_t i = 0; i < dataset.entries.size(); ++i) by_source[dataset.entries[i].source_id].push_back(i);
  std::vector<ManifestEntry> out;
  for (const auto& [source, members] : by_source) {
    RngStream rng{seed, hash_string(dataset.dataset_id), hash_string(source), 0x636170ull /* "cap" */};
    for (std::size_t k : choose(members.size(), static_cast<std::size_t>(std::max<std::int64_t>(cap, 0)), rng)) {
      out.push_back(dataset.entries[members[k]]);
    }
  }
  return out;
}

bool TagFilters::accepts(const DatasetManifest& d) const {
  if (!organs.empty() && !organs.count(d.organ)) return false;
  if (!resolutions.empty() && !resolutions.count(d.resolution)) return false;
  if (!stains.empty() && !stains.count(d.stain)) return false;
  return true;
}

void SamplingPolicy::validate() const {
  if (!(percent > 0.0 && percent <= 100.0)) throw ConfigError("sampling percent must lie in (0, 100]");
  if (per_dataset_min > per_dataset_max) throw ConfigError("per-dataset minimum exceeds maximum");
  if (per_wsi_cap < 1) throw ConfigError("per-WSI cap must be >= 1");
}

std::vector<SampledEntry> build_pretraining_set(const ManifestCollection& collection, const SamplingPolicy& policy) {
  policy.validate();
  std::vector<SampledEntry> out;
  std::size_t used = 0;
  for (const auto& dataset : collection) {
    if (!policy.filters.accepts(dataset)) {
      spdlog::warn("dataset '{}' excluded by tag filters", dataset.dataset_id);
      continue;
    }
    ++used;
    std::vector<ManifestEntry> pool = dataset.kind == SourceKind::wsi
                                          ? cap_per_source(dataset, policy.per_wsi_cap, policy.seed)
                                          : dataset.entries;
    const auto quota = percentage_quota(static_cast<std::int64_t>(pool.size()), policy.percent,
                                        policy.per_dataset_min, policy.per_dataset_max);
    RngStream rng{policy.seed, hash_string(dataset.dataset_id), 0x71756F7461ull /* "quota" */};
    for (std::size_t k : choose(pool.size(), static_cast<std::size_t>(quota), rng)) {
      out.push_back({dataset.dataset_id, pool[k], dataset.resolution});
    }
  }
  if (used == 0) throw ConfigError("every dataset was excluded by the filters; nothing to sample");
  RngStream shuffle{policy.seed, 0x73687566ull /* "shuf" */};
  for (std::size_t i = out.size(); i > 1; --i) {
    std::swap(out[i - 1], out[static_cast<std::size_t>(shuffle.uniform_int(i))]);
  }
  return out;
}

void write_entry_list(const std::filesystem::path& path, const std::vector<SampledEntry>& entries) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& s : entries) {
    json j;
    j["dataset_id"] = s.dataset_id;
    j["path"] = s.entry.path;
    j["source_id"] = s.entry.source_id;
    j["x"] = s.entry.x;
    j["y"] = s.entry.y;
    j["resolution"] = to_string(s.resolution);
    out << j.dump() << '\n';
  }
}

std::vector<SampledEntry> read_entry_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<SampledEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      SampledEntry s;
      s.dataset_id = j.at("dataset_id").get<std::string>();
      s.entry.path = j.at("path").get<std::string>();
      s.entry.source_id = j.value("source_id", s.entry.path);
      s.entry.x = j.value("x", 0);
      s.entry.y = j.value("y", 0);
      s.resolution = parse_resolution(j.value("resolution", std::string("unknown")));
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cpath::data
