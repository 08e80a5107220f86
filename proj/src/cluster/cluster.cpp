#include "cpath/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "cpath/container.hpp"
#include "cpath/errors.hpp"
#include "cpath/parallel.hpp"
#include "cpath/rng.hpp"

namespace cpath::cluster {

namespace {

double sq_dist(std::span<const float> x, const double* c, std::int64_t d) {
  double s = 0.0;
  for (std::int64_t j = 0; j < d; ++j) {
    const double diff = static_cast<double>(x[j]) - c[j];
    s += diff * diff;
  }
  return s;
}

void check_features(const FeatureMatrix& f) {
  if (f.cols < 1) throw ContractError("features need at least one dimension");
  if (static_cast<std::int64_t>(f.values.size()) != f.rows * f.cols) throw ContractError("feature matrix size mismatch");
}

// Per-cluster means of the given assignment; empty clusters keep `fallback`.
std::vector<double> cluster_means(const FeatureMatrix& f, const std::vector<int>& labels, int k,
                                  const std::vector<double>& fallback) {
  const std::int64_t d = f.cols;
  std::vector<double> sums(static_cast<std::size_t>(k * d), 0.0);
  std::vector<std::int64_t> n(static_cast<std::size_t>(k), 0);
  for (std::int64_t i = 0; i < f.rows; ++i) {
    const int c = labels[i];
    ++n[c];
    const auto x = f.row(i);
    for (std::int64_t j = 0; j < d; ++j) sums[c * d + j] += x[j];
  }
  for (int c = 0; c < k; ++c) {
    for (std::int64_t j = 0; j < d; ++j) {
      sums[c * d + j] = n[c] > 0 ? sums[c * d + j] / static_cast<double>(n[c]) : fallback[c * d + j];
    }
  }
  return sums;
}

double within_ss(const FeatureMatrix& f, const std::vector<int>& labels, const std::vector<double>& centers) {
  double s = 0.0;
  for (std::int64_t i = 0; i < f.rows; ++i) s += sq_dist(f.row(i), centers.data() + labels[i] * f.cols, f.cols);
  return s;
}

}  // namespace

void KMeansOptions::validate() const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (iters < 0) throw ConfigError("iters must be >= 0");
}

std::vector<double> kmeans_plus_plus(const FeatureMatrix& f, int k, std::uint64_t seed) {
  check_features(f);
  if (k < 1 || k > f.rows) throw ContractError("k-means++ needs 1 <= k <= N (k=" + std::to_string(k) + ")");
  const std::int64_t d = f.cols;
  RngStream rng{seed, 0x6B6D2B2Bull /* "km++" */};
  std::vector<double> centers;
  centers.reserve(static_cast<std::size_t>(k * d));
  std::vector<char> chosen(static_cast<std::size_t>(f.rows), 0);
  auto take = [&](std::int64_t i) {
    chosen[i] = 1;
    for (float v : f.row(i)) centers.push_back(v);
  };
  take(static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(f.rows))));
  std::vector<double> best(static_cast<std::size_t>(f.rows), std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    const double* last = centers.data() + (c - 1) * d;
    double total = 0.0;
    for (std::int64_t i = 0; i < f.rows; ++i) {
      best[i] = std::min(best[i], sq_dist(f.row(i), last, d));
      if (!chosen[i]) total += best[i];
    }
    std::int64_t pick = -1;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (std::int64_t i = 0; i < f.rows; ++i) {
        if (chosen[i]) continue;
        acc += best[i];
        if (acc > r && best[i] > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick < 0)
        for (std::int64_t i = f.rows - 1; i >= 0; --i)
          if (!chosen[i] && best[i] > 0.0) {
            pick = i;
            break;
          }
    } else {
      // Every remaining point coincides with a chosen centroid.
      std::vector<std::int64_t> left;
      for (std::int64_t i = 0; i < f.rows; ++i)
        if (!chosen[i]) left.push_back(i);
      pick = left[static_cast<std::size_t>(rng.uniform_int(left.size()))];
    }
    take(pick);
  }
  return centers;
}

std::vector<int> assign(const FeatureMatrix& f, std::span<const double> centroids, int k) {
  check_features(f);
  const std::int64_t d = f.cols;
  if (static_cast<std::int64_t>(centroids.size()) != k * d) throw ContractError("centroid matrix size mismatch");
  std::vector<int> out(static_cast<std::size_t>(f.rows));
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (static_cast<std::size_t>(f.rows) + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t ci) {
    const std::size_t end = std::min(static_cast<std::size_t>(f.rows), (ci + 1) * kChunk);
    for (std::size_t i = ci * kChunk; i < end; ++i) {
      const auto x = f.row(static_cast<std::int64_t>(i));
      int best = 0;
      double best_d = sq_dist(x, centroids.data(), d);
      for (int c = 1; c < k; ++c) {
        const double dist = sq_dist(x, centroids.data() + c * d, d);
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      out[i] = best;
    }
  });
  return out;
}

ClusterModel minibatch_kmeans(const FeatureMatrix& f, const KMeansOptions& o) {
  o.validate();
  check_features(f);
  if (o.k > f.rows) throw ContractError("k=" + std::to_string(o.k) + " exceeds the number of points " + std::to_string(f.rows));
  return minibatch_kmeans(f, o, kmeans_plus_plus(f, o.k, o.seed));
}

ClusterModel minibatch_kmeans(const FeatureMatrix& f, const KMeansOptions& o, std::vector<double> centers) {
  o.validate();
  check_features(f);
  if (o.k > f.rows) throw ContractError("k=" + std::to_string(o.k) + " exceeds the number of points " + std::to_string(f.rows));
  const std::int64_t d = f.cols;
  if (static_cast<std::int64_t>(centers.size()) != o.k * d) throw ContractError("initial centroids have the wrong size");
  const std::size_t n = static_cast<std::size_t>(f.rows);
  const std::size_t batch = std::min(n, static_cast<std::size_t>(o.batch));
  std::vector<std::int64_t> seen(static_cast<std::size_t>(o.k), 0);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> labels(batch);

  for (int it = 0; it < o.iters; ++it) {
    std::vector<std::size_t> rows;
    if (batch == n) {
      rows = pool;
    } else {
      RngStream rng{o.seed, static_cast<std::uint64_t>(it), 0x6D62ull /* "mb" */};
      for (std::size_t i = 0; i < batch; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
        std::swap(pool[i], pool[j]);
      }
      rows.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(batch));
    }
    // Assign the whole batch first, then apply the streaming updates.
    for (std::size_t b = 0; b < rows.size(); ++b) {
      const auto x = f.row(static_cast<std::int64_t>(rows[b]));
      int best = 0;
      double best_d = sq_dist(x, centers.data(), d);
      for (int c = 1; c < o.k; ++c) {
        const double dist = sq_dist(x, centers.data() + c * d, d);
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      labels[b] = best;
    }
    for (std::size_t b = 0; b < rows.size(); ++b) {
      const int c = labels[b];
      const double eta = 1.0 / static_cast<double>(++seen[c]);
      const auto x = f.row(static_cast<std::int64_t>(rows[b]));
      double* ctr = centers.data() + c * d;
      for (std::int64_t j = 0; j < d; ++j) ctr[j] = eta == 1.0 ? x[j] : (1.0 - eta) * ctr[j] + eta * x[j];
    }
  }

  ClusterModel m;
  m.k = o.k;
  m.dim = d;
  m.centroids = std::move(centers);
  m.assignment = assign(f, m.centroids, m.k);
  m.counts.assign(static_cast<std::size_t>(m.k), 0);
  for (int c : m.assignment) ++m.counts[c];
  m.inertia = within_ss(f, m.assignment, m.centroids);
  return m;
}

double explained_variance(const FeatureMatrix& f, const ClusterModel& m) {
  check_features(f);
  if (static_cast<std::int64_t>(m.assignment.size()) != f.rows || m.dim != f.cols) {
    throw ContractError("cluster model was not fitted on these features");
  }
  const std::vector<int> one(static_cast<std::size_t>(f.rows), 0);
  const auto global = cluster_means(f, one, 1, std::vector<double>(static_cast<std::size_t>(f.cols), 0.0));
  const double tss = within_ss(f, one, global);
  if (tss == 0.0) return 1.0;
  const auto means = cluster_means(f, m.assignment, m.k, m.centroids);
  const double wss = within_ss(f, m.assignment, means);
  return std::clamp(1.0 - wss / tss, 0.0, 1.0);
}

std::vector<ElbowRow> elbow_scan(const FeatureMatrix& f, const std::vector<int>& ks, const KMeansOptions& options) {
  if (!std::is_sorted(ks.begin(), ks.end())) throw ContractError("elbow ks must be sorted ascending");
  std::vector<ElbowRow> rows;
  for (int k : ks) {
    KMeansOptions o = options;
    o.k = k;
    const auto m = minibatch_kmeans(f, o);
    rows.push_back({k, explained_variance(f, m)});
  }
  return rows;
}

std::vector<Neighbor> nearest_neighbors(std::span<const float> query, const FeatureMatrix& f, std::size_t n) {
  check_features(f);
  if (static_cast<std::int64_t>(query.size()) != f.cols) throw DimensionError("query dimension does not match features");
  if (n > static_cast<std::size_t>(f.rows)) throw ContractError("n exceeds the number of feature rows");
  std::vector<Neighbor> all(static_cast<std::size_t>(f.rows));
  for (std::int64_t i = 0; i < f.rows; ++i) {
    double s = 0.0;
    const auto x = f.row(i);
    for (std::int64_t j = 0; j < f.cols; ++j) {
      const double diff = static_cast<double>(x[j]) - static_cast<double>(query[j]);
      s += diff * diff;
    }
    all[i] = {static_cast<std::size_t>(i), std::sqrt(s)};
  }
  auto less = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), less);
  all.resize(n);
  return all;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ContractError("ARI needs labelings of equal length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<int, int>, std::int64_t> table;
  std::map<int, std::int64_t> ra, rb;
  for (std::size_t i = 0; i < n; ++i) {
    ++table[{a[i], b[i]}];
    ++ra[a[i]];
    ++rb[b[i]];
  }
  auto c2 = [](std::int64_t x) { return static_cast<double>(x) * static_cast<double>(x - 1) / 2.0; };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [key, v] : table) index += c2(v);
  for (const auto& [key, v] : ra) sa += c2(v);
  for (const auto& [key, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<std::int64_t>(n));
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

void write_assignments(const ClusterModel& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "index,cluster_id\n";
  for (std::size_t i = 0; i < m.assignment.size(); ++i) out << i << ',' << m.assignment[i] << '\n';
}

void save_centroids(const ClusterModel& m, const std::filesystem::path& path) {
  std::vector<float> values(m.centroids.begin(), m.centroids.end());
  io::write_container(path, {io::Entry::floats("centroids",
                                               {static_cast<std::uint64_t>(m.k), static_cast<std::uint64_t>(m.dim)},
                                               std::move(values))});
}

std::string format_elbow_csv(const std::vector<ElbowRow>& rows) {
  std::string out = "k,explained_variance\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.9g\n", r.k, r.explained_variance);
    out += buf;
  }
  return out;
}

}  // namespace cpath::cluster
