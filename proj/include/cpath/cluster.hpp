#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpath/features.hpp"

namespace cpath::cluster {

struct ClusterModel {
  int k = 0;
  std::int64_t dim = 0;
  std::vector<double> centroids;     // k x dim, row-major
  std::vector<std::int64_t> counts;  // points per centroid in the final assignment
  std::vector<int> assignment;       // final full-pass assignment, one per feature row
  double inertia = 0.0;              // sum of squared distances to the assigned centroid

  std::span<const double> centroid(int c) const {
    return {centroids.data() + static_cast<std::size_t>(c) * dim, static_cast<std::size_t>(dim)};
  }
};

struct KMeansOptions {
  int k = 8;
  int batch = 1024;  // clipped to N; batch >= N processes every row each iteration
  int iters = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// k-means++ seeding: first centroid uniform, later ones drawn with
/// probability proportional to squared distance to the nearest chosen one.
std::vector<double> kmeans_plus_plus(const FeatureMatrix& features, int k, std::uint64_t seed);

/// Nearest centroid by squared Euclidean distance, lowest index on ties.
std::vector<int> assign(const FeatureMatrix& features, std::span<const double> centroids, int k);

/// Mini-batch k-means: every iteration assigns a sampled batch against the
/// current centroids, then moves each centroid towards its points one at a
/// time with rate 1 / (points seen so far).
ClusterModel minibatch_kmeans(const FeatureMatrix& features, const KMeansOptions& options);
/// Same, starting from the given k x dim centroids instead of k-means++.
ClusterModel minibatch_kmeans(const FeatureMatrix& features, const KMeansOptions& options,
                              std::vector<double> initial_centroids);

/// 1 - WSS / TSS, where WSS is taken about the means of the final clusters
/// and TSS about the global mean. Defined as 1 when TSS is zero.
double explained_variance(const FeatureMatrix& features, const ClusterModel& model);

struct ElbowRow {
  int k = 0;
  double explained_variance = 0.0;
};

/// One fit per k (ascending), all with options.seed.
std::vector<ElbowRow> elbow_scan(const FeatureMatrix& features, const std::vector<int>& ks,
                                 const KMeansOptions& options);

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

/// The n rows closest to query in Euclidean distance, ascending, ties by index.
std::vector<Neighbor> nearest_neighbors(std::span<const float> query, const FeatureMatrix& features, std::size_t n);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// "index,cluster_id" rows.
void write_assignments(const ClusterModel& model, const std::filesystem::path& path);
/// Container with one f32 entry "centroids" of shape [k, dim].
void save_centroids(const ClusterModel& model, const std::filesystem::path& path);
std::string format_elbow_csv(const std::vector<ElbowRow>& rows);

}  // namespace cpath::cluster
