#include <filesystem>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "cpath/data.hpp"
#include "cpath/errors.hpp"

using namespace cpath;
using namespace cpath::data;

namespace {

DatasetManifest patch_dataset(const std::string& id, int count, const std::string& organ = "breast",
                              Resolution res = Resolution::x20) {
  DatasetManifest d;
  d.dataset_id = id;
  d.organ = organ;
  d.stain = "he";
  d.resolution = res;
  for (int i = 0; i < count; ++i) d.entries.push_back({id + "/p" + std::to_string(i) + ".png", id, 0, 0});
  return d;
}

DatasetManifest wsi_dataset(const std::string& id, const std::vector<int>& per_slide) {
  DatasetManifest d;
  d.dataset_id = id;
  d.kind = SourceKind::wsi;
  d.organ = "colon";
  d.resolution = Resolution::x40;
  for (std::size_t s = 0; s < per_slide.size(); ++s)
    for (int i = 0; i < per_slide[s]; ++i)
      d.entries.push_back({id + "/s" + std::to_string(s) + "_" + std::to_string(i) + ".png", "slide" + std::to_string(s),
                           i * 224, 0});
  return d;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cpath_test_data_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Quota, Examples) {
  EXPECT_EQ(percentage_quota(30000, 5), 1500);
  EXPECT_EQ(percentage_quota(100000, 5), 2000);
  EXPECT_EQ(percentage_quota(100, 5), 10);
  EXPECT_EQ(percentage_quota(5, 5), 5);
  EXPECT_EQ(percentage_quota(0, 50), 0);
  EXPECT_EQ(percentage_quota(1000, 100), 1000);
}

TEST(Quota, RoundsHalfToEven) {
  EXPECT_EQ(percentage_quota(50, 5, 0, 2000), 2);   // 2.5
  EXPECT_EQ(percentage_quota(70, 5, 0, 2000), 4);   // 3.5
  EXPECT_EQ(percentage_quota(30, 5, 0, 2000), 2);   // 1.5
  EXPECT_EQ(percentage_quota(90, 5, 0, 2000), 4);   // 4.5
}

TEST(Quota, MonotoneAndBounded) {
  for (double p : {1.0, 5.0, 10.0, 33.3, 100.0}) {
    std::int64_t prev = 0;
    for (std::int64_t n = 0; n < 60000; n += 137) {
      const auto q = percentage_quota(n, p);
      EXPECT_GE(q, prev);
      EXPECT_LE(q, std::min<std::int64_t>(n, 2000));
      EXPECT_GE(q, std::min<std::int64_t>(n, 10));
      prev = q;
    }
  }
  for (std::int64_t n : {0, 7, 500, 99999}) {
    std::int64_t prev = 0;
    for (double p = 1; p <= 100; p += 1) {
      EXPECT_GE(percentage_quota(n, p), prev);
      prev = percentage_quota(n, p);
    }
  }
}

TEST(Cap, LimitsEverySource) {
  auto d = wsi_dataset("wsi", {250, 40, 100, 101});
  for (std::int64_t cap : {1, 50, 100, 1000}) {
    auto picked = cap_per_source(d, cap, 3);
    std::map<std::string, int> counts;
    std::set<std::string> paths;
    for (const auto& e : picked) {
      counts[e.source_id]++;
      paths.insert(e.path);
    }
    EXPECT_EQ(paths.size(), picked.size());
    EXPECT_EQ(counts["slide0"], std::min<std::int64_t>(cap, 250));
    EXPECT_EQ(counts["slide1"], std::min<std::int64_t>(cap, 40));
    EXPECT_EQ(counts["slide2"], std::min<std::int64_t>(cap, 100));
    EXPECT_EQ(counts["slide3"], std::min<std::int64_t>(cap, 101));
  }
}

TEST(Cap, UniformOverSeeds) {
  auto d = wsi_dataset("wsi", {20});
  std::vector<int> hits(20, 0);
  const int trials = 4000;
  for (int s = 0; s < trials; ++s)
    for (const auto& e : cap_per_source(d, 5, s)) hits[static_cast<std::size_t>(e.x / 224)]++;
  // each patch expected trials * 5 / 20 = 1000 times; sd about 27
  for (int h : hits) EXPECT_NEAR(h, 1000, 140);
}

TEST(PretrainingSet, QuotasPerDataset) {
  ManifestCollection c{patch_dataset("a", 30000), patch_dataset("b", 100), wsi_dataset("w", {300, 300, 50})};
  SamplingPolicy p;
  p.percent = 5;
  p.seed = 9;
  auto set = build_pretraining_set(c, p);
  std::map<std::string, int> counts;
  std::set<std::string> unique;
  for (const auto& e : set) {
    counts[e.dataset_id]++;
    unique.insert(e.entry.path);
  }
  EXPECT_EQ(unique.size(), set.size());
  EXPECT_EQ(counts["a"], 1500);
  EXPECT_EQ(counts["b"], 10);
  EXPECT_EQ(counts["w"], 12);  // 250 after the cap, 5% = 12.5 -> 12
}

TEST(PretrainingSet, Deterministic) {
  ManifestCollection c{patch_dataset("a", 500), wsi_dataset("w", {120, 80})};
  SamplingPolicy p;
  p.percent = 20;
  p.seed = 4;
  EXPECT_EQ(build_pretraining_set(c, p), build_pretraining_set(c, p));
  auto q = p;
  q.seed = 5;
  EXPECT_NE(build_pretraining_set(c, p), build_pretraining_set(c, q));
}

TEST(PretrainingSet, Filters) {
  ManifestCollection c{patch_dataset("a", 50, "breast", Resolution::x20), patch_dataset("b", 50, "lung", Resolution::x40),
                       patch_dataset("c", 50, "breast", Resolution::x40)};
  SamplingPolicy p;
  p.filters.organs = {"breast"};
  p.filters.resolutions = {Resolution::x40};
  auto set = build_pretraining_set(c, p);
  ASSERT_EQ(set.size(), 50u);
  for (const auto& e : set) EXPECT_EQ(e.dataset_id, "c");
  p.filters.stains = {"ihc"};
  EXPECT_THROW(build_pretraining_set(c, p), ConfigError);
}

TEST(PretrainingSet, PolicyValidation) {
  SamplingPolicy p;
  p.percent = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p.percent = 10;
  p.per_dataset_min = 50;
  p.per_dataset_max = 20;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Manifest, RoundTrip) {
  auto dir = temp_dir("roundtrip");
  ManifestCollection c{patch_dataset("a", 3), wsi_dataset("w", {2, 1})};
  write_manifest(dir / "m.jsonl", c);
  EXPECT_EQ(load_manifests({dir / "m.jsonl"}), c);
}

TEST(Manifest, Errors) {
  EXPECT_THROW(parse_manifest_text("{\"dataset_id\":\"a\",\"path\":\"x\",\"bogus\":1}\n"), ParseError);
  EXPECT_THROW(parse_manifest_text("not json\n"), ParseError);
  const std::string a = "{\"dataset_id\":\"a\",\"organ\":\"lung\",\"path\":\"x\"}\n";
  const std::string b = "{\"dataset_id\":\"a\",\"organ\":\"colon\",\"path\":\"y\"}\n";
  EXPECT_THROW(parse_manifest_text(a + b), ParseError);
  auto dir = temp_dir("dup");
  write_manifest(dir / "one.jsonl", {patch_dataset("a", 2)});
  write_manifest(dir / "two.jsonl", {patch_dataset("a", 2)});
  EXPECT_THROW(load_manifests({dir / "one.jsonl", dir / "two.jsonl"}), ParseError);
  EXPECT_THROW(load_manifests({dir / "missing.jsonl"}), IoError);
}

TEST(EntryList, RoundTrip) {
  auto dir = temp_dir("list");
  ManifestCollection c{patch_dataset("a", 40), wsi_dataset("w", {30})};
  SamplingPolicy p;
  p.seed = 2;
  auto set = build_pretraining_set(c, p);
  write_entry_list(dir / "list.jsonl", set);
  EXPECT_EQ(read_entry_list(dir / "list.jsonl"), set);
}
