#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cpath/image.hpp"

namespace cpath::data {

enum class SourceKind { patch, wsi };

std::string to_string(SourceKind k);
SourceKind parse_source_kind(const std::string& s);

struct ManifestEntry {
  std::string path;
  std::string source_id;
  int x = 0;
  int y = 0;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::string dataset_id;
  SourceKind kind = SourceKind::patch;
  std::string organ = "unknown";
  std::string stain = "unknown";
  Resolution resolution = Resolution::unknown;
  std::vector<ManifestEntry> entries;

  bool operator==(const DatasetManifest&) const = default;
};

using ManifestCollection = std::vector<DatasetManifest>;

/// Manifest files are JSON lines; each line carries the dataset tags plus one
/// entry: {"dataset_id","kind","organ","stain","resolution","path","source_id","x","y"}.
/// Lines of one dataset must agree on every tag. A dataset may not span files.
ManifestCollection load_manifests(const std::vector<std::filesystem::path>& paths);
ManifestCollection parse_manifest_text(const std::string& text, const std::string& origin = "<memory>");
void write_manifest(const std::filesystem::path& path, const ManifestCollection& collection);
std::string manifest_line(const DatasetManifest& dataset, const ManifestEntry& entry);

/// clamp(round_half_even(available * percent / 100), min, max), then capped at available.
std::int64_t percentage_quota(std::int64_t available, double percent, std::int64_t minimum = 10,
                              std::int64_t maximum = 2000);

/// For every source, min(cap, available) entries drawn uniformly without
/// replacement. Sources are visited in sorted id order; the per-source draw
/// order is kept.
std::vector<ManifestEntry> cap_per_source(const DatasetManifest& dataset, std::int64_t cap, std::uint64_t seed);

struct TagFilters {
  std::set<std::string> organs;
  std::set<Resolution> resolutions;
  std::set<std::string> stains;

  bool accepts(const DatasetManifest& dataset) const;
};

struct SamplingPolicy {
  std::int64_t per_wsi_cap = 100;
  double percent = 100.0;
  std::int64_t per_dataset_min = 10;
  std::int64_t per_dataset_max = 2000;
  TagFilters filters;
  std::uint64_t seed = 0;

  void validate() const;
};

/// A manifest entry together with the dataset it came from.
struct SampledEntry {
  std::string dataset_id;
  ManifestEntry entry;
  Resolution resolution = Resolution::unknown;

  bool operator==(const SampledEntry&) const = default;
};

/// Filters -> per-WSI cap -> per-dataset percentage quota -> seeded shuffle.
std::vector<SampledEntry> build_pretraining_set(const ManifestCollection& collection, const SamplingPolicy& policy);

/// Training lists are JSON lines of sampled entries.
void write_entry_list(const std::filesystem::path& path, const std::vector<SampledEntry>& entries);
std::vector<SampledEntry> read_entry_list(const std::filesystem::path& path);

}  // namespace cpath::data
