#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "cpath/cluster.hpp"
#include "cpath/container.hpp"
#include "cpath/errors.hpp"
#include "cpath/rng.hpp"

using namespace cpath;
using namespace cpath::cluster;

namespace {

FeatureMatrix blobs(int per, int k, int dim, double spread, std::uint64_t seed, std::vector<int>* truth = nullptr) {
  FeatureMatrix f{static_cast<std::int64_t>(per) * k, dim, {}};
  RngStream rng{seed};
  for (int i = 0; i < per * k; ++i) {
    const int c = i % k;
    if (truth) truth->push_back(c);
    for (int d = 0; d < dim; ++d) f.values.push_back(static_cast<float>((d == c % dim ? 10.0 * (1 + c / dim) : 0.0) +
                                                                        spread * rng.normal()));
  }
  return f;
}

double inertia_oracle(const FeatureMatrix& f, const ClusterModel& m) {
  double s = 0;
  for (std::int64_t i = 0; i < f.rows; ++i) {
    auto c = m.centroid(m.assignment[static_cast<std::size_t>(i)]);
    for (std::int64_t d = 0; d < f.cols; ++d) s += (f.row(i)[d] - c[d]) * (f.row(i)[d] - c[d]);
  }
  return s;
}

}  // namespace

TEST(KMeans, Validation) {
  KMeansOptions o;
  o.k = 0;
  EXPECT_THROW(o.validate(), ConfigError);
  o.k = 2;
  o.iters = -1;
  EXPECT_THROW(o.validate(), ConfigError);
}

TEST(KMeans, EveryPointItsOwnCluster) {
  auto f = blobs(1, 5, 5, 0.0, 1);
  KMeansOptions o;
  o.k = 5;
  auto m = minibatch_kmeans(f, o);
  EXPECT_NEAR(m.inertia, 0.0, 1e-9);
  std::vector<int> sorted = m.assignment;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_NEAR(explained_variance(f, m), 1.0, 1e-12);
}

TEST(KMeans, SingleClusterIsTheMean) {
  auto f = blobs(40, 3, 4, 1.0, 2);
  KMeansOptions o;
  o.k = 1;
  o.batch = 1000;
  o.iters = 3;
  auto m = minibatch_kmeans(f, o);
  for (std::int64_t d = 0; d < f.cols; ++d) {
    double mean = 0;
    for (std::int64_t i = 0; i < f.rows; ++i) mean += f.row(i)[d];
    mean /= static_cast<double>(f.rows);
    EXPECT_NEAR(m.centroids[d], mean, 1e-9);
  }
  EXPECT_NEAR(explained_variance(f, m), 0.0, 1e-9);
  EXPECT_EQ(m.counts[0], f.rows);
}

TEST(KMeans, RecoversSeparatedBlobs) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    std::vector<int> truth;
    auto f = blobs(100, 4, 6, 0.7, seed, &truth);
    KMeansOptions o;
    o.k = 4;
    o.batch = 64;
    o.iters = 100;
    o.seed = seed;
    auto m = minibatch_kmeans(f, o);
    EXPECT_GE(adjusted_rand_index(m.assignment, truth), 0.99);
    EXPECT_NEAR(m.inertia, inertia_oracle(f, m), 1e-6 * m.inertia);
    EXPECT_EQ(std::accumulate(m.counts.begin(), m.counts.end(), std::int64_t{0}), f.rows);
  }
}

TEST(KMeans, Deterministic) {
  auto f = blobs(50, 3, 4, 2.0, 4);
  KMeansOptions o;
  o.k = 3;
  o.batch = 16;
  o.seed = 9;
  auto a = minibatch_kmeans(f, o);
  auto b = minibatch_kmeans(f, o);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.assignment, b.assignment);
}

TEST(KMeans, FullBatchLloydFixedPoint) {
  // centroids already at the cluster means do not move under a full batch
  auto f = blobs(30, 3, 3, 0.5, 5);
  std::vector<double> means(9, 0.0);
  for (std::int64_t i = 0; i < f.rows; ++i)
    for (int d = 0; d < 3; ++d) means[(i % 3) * 3 + d] += f.row(i)[d] / 30.0;
  KMeansOptions o;
  o.k = 3;
  o.batch = 1000;
  o.iters = 5;
  auto m = minibatch_kmeans(f, o, means);
  for (std::size_t j = 0; j < 9; ++j) EXPECT_NEAR(m.centroids[j], means[j], 1e-9);
}

TEST(KMeans, PermutationInvariantPartition) {
  std::vector<int> truth;
  auto f = blobs(60, 3, 3, 0.5, 6, &truth);
  std::vector<std::size_t> perm(static_cast<std::size_t>(f.rows));
  std::iota(perm.begin(), perm.end(), 0);
  RngStream rng{1};
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_int(i)]);
  FeatureMatrix g{f.rows, f.cols, {}};
  for (auto p : perm)
    for (auto v : f.row(static_cast<std::int64_t>(p))) g.values.push_back(v);
  KMeansOptions o;
  o.k = 3;
  o.batch = 1000;
  auto a = minibatch_kmeans(f, o);
  auto b = minibatch_kmeans(g, o);
  std::vector<int> b_back(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) b_back[perm[i]] = b.assignment[i];
  EXPECT_NEAR(adjusted_rand_index(a.assignment, b_back), 1.0, 1e-12);
  EXPECT_NEAR(a.inertia, b.inertia, 1e-6 * a.inertia);
}

TEST(Assign, TiesGoToLowestIndex) {
  FeatureMatrix f{1, 1, {0.0f}};
  const std::vector<double> c{1.0, -1.0, 5.0};
  EXPECT_EQ(assign(f, c, 3)[0], 0);
  const std::vector<double> c2{5.0, -1.0, 1.0};
  EXPECT_EQ(assign(f, c2, 3)[0], 1);
}

TEST(SeedingPlusPlus, PicksDistinctRows) {
  auto f = blobs(20, 4, 4, 0.1, 7);
  auto c = kmeans_plus_plus(f, 4, 3);
  ASSERT_EQ(c.size(), 16u);
  std::vector<int> hit(4, 0);
  for (int j = 0; j < 4; ++j) {
    bool is_row = false;
    for (std::int64_t i = 0; i < f.rows && !is_row; ++i)
      is_row = std::equal(f.row(i).begin(), f.row(i).end(), c.begin() + j * 4,
                          [](float a, double b) { return static_cast<double>(a) == b; });
    EXPECT_TRUE(is_row);
  }
  // far-apart blobs: one seed lands in each
  auto labels = assign(f, c, 4);
  std::sort(labels.begin(), labels.end());
  EXPECT_EQ(std::unique(labels.begin(), labels.end()) - labels.begin(), 4);
}

TEST(ExplainedVariance, Endpoints) {
  FeatureMatrix same{4, 2, {1, 1, 1, 1, 1, 1, 1, 1}};
  KMeansOptions o;
  o.k = 2;
  auto m = minibatch_kmeans(same, o);
  EXPECT_DOUBLE_EQ(explained_variance(same, m), 1.0);
  auto f = blobs(20, 2, 2, 1.0, 8);
  std::vector<double> prev;
  double last = -1;
  for (auto& row : elbow_scan(f, {1, 2, 4, 8}, {})) {
    EXPECT_GE(row.explained_variance, -1e-12);
    EXPECT_LE(row.explained_variance, 1.0 + 1e-12);
    if (row.k == 1) EXPECT_NEAR(row.explained_variance, 0.0, 1e-9);
    EXPECT_GT(row.explained_variance, last - 0.05);
    last = row.explained_variance;
  }
}

TEST(Elbow, RowsAndCsv) {
  auto f = blobs(30, 3, 3, 0.5, 9);
  auto rows = elbow_scan(f, {1, 3, 5}, {});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].k, 3);
  EXPECT_GT(rows[1].explained_variance, 0.9);
  const auto csv = format_elbow_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,explained_variance");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Neighbors, SortedWithIndexTies) {
  FeatureMatrix f{5, 1, {3, -1, 1, 0, 1}};
  const std::vector<float> q{0};
  auto n = nearest_neighbors(q, f, 4);
  ASSERT_EQ(n.size(), 4u);
  EXPECT_EQ(n[0].index, 3u);
  EXPECT_EQ(n[1].index, 1u);
  EXPECT_EQ(n[2].index, 2u);
  EXPECT_EQ(n[3].index, 4u);
  EXPECT_DOUBLE_EQ(n[1].distance, 1.0);
  EXPECT_EQ(nearest_neighbors(q, f, 5).size(), 5u);
  EXPECT_THROW(nearest_neighbors(q, f, 6), ContractError);
}

TEST(Ari, Examples) {
  const std::vector<int> a{0, 0, 1, 1, 2, 2};
  const std::vector<int> relabeled{2, 2, 0, 0, 1, 1};
  EXPECT_NEAR(adjusted_rand_index(a, relabeled), 1.0, 1e-12);
  // hand-computed: contingency {{1,1},{1,1}} on 4 points -> index 0, expected 1/3 -> ARI -0.5
  const std::vector<int> x{0, 0, 1, 1}, y{0, 1, 0, 1};
  EXPECT_NEAR(adjusted_rand_index(x, y), -0.5, 1e-12);
}

TEST(Artifacts, AssignmentsAndCentroids) {
  auto dir = std::filesystem::temp_directory_path() / "cpath_test_cluster";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  auto f = blobs(5, 2, 2, 0.1, 10);
  KMeansOptions o;
  o.k = 2;
  auto m = minibatch_kmeans(f, o);
  write_assignments(m, dir / "a.csv");
  std::ifstream in(dir / "a.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "index,cluster_id");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 11);
  save_centroids(m, dir / "c.sslh");
  auto entries = io::read_container(dir / "c.sslh");
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].name, "centroids");
  EXPECT_EQ(entries[0].dims, (std::vector<std::uint64_t>{2, 2}));
}
