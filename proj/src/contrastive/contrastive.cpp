#include "cpath/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "cpath/errors.hpp"

namespace cpath::contrastive {

std::vector<std::size_t> adjacent_pairing(std::size_t rows) {
  if (rows % 2 != 0) throw ContractError("pairing needs an even number of rows");
  std::vector<std::size_t> partner(rows);
  for (std::size_t i = 0; i < rows; ++i) partner[i] = i ^ 1u;
  return partner;
}

template <typename T>
ContrastiveBatch<T> ContrastiveBatch<T>::adjacent_pairs(tg::Tensor<T> z, double temperature) {
  ContrastiveBatch batch;
  batch.partner = adjacent_pairing(static_cast<std::size_t>(z.dim(0)));
  batch.z = std::move(z);
  batch.temperature = temperature;
  return batch;
}

template <typename T>
void ContrastiveBatch<T>::validate() const {
  if (!(temperature > 0.0)) throw ContractError("temperature must be positive");
  if (z.rank() != 2) throw DimensionError("contrastive batch needs [2N,D] projections");
  const std::size_t rows = static_cast<std::size_t>(z.dim(0));
  if (rows < 2 || rows % 2 != 0) throw ContractError("contrastive batch needs an even number (>= 2) of rows");
  if (partner.size() != rows) throw ContractError("pairing size does not match the number of rows");
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t j = partner[i];
    if (j >= rows || j == i || partner[j] != i) throw ContractError("pairing is not a perfect matching");
  }
}

template <typename T>
tg::Tensor<T> similarity_matrix(const tg::Tensor<T>& z) {
  if (z.rank() != 2) throw DimensionError("similarity_matrix expects [rows,D], got " + tg::shape_str(z.shape()));
  const std::int64_t R = z.dim(0), D = z.dim(1);
  const auto zs = z.data();
  auto unit = std::make_shared<std::vector<T>>(z.numel());
  std::vector<T> norms(static_cast<std::size_t>(R));
  for (std::int64_t i = 0; i < R; ++i) {
    T ss = T(0);
    for (std::int64_t d = 0; d < D; ++d) ss += zs[i * D + d] * zs[i * D + d];
    norms[i] = std::sqrt(ss);
    if (!(norms[i] > T(0))) throw ContractError("similarity_matrix: row " + std::to_string(i) + " has zero norm");
    for (std::int64_t d = 0; d < D; ++d) (*unit)[i * D + d] = zs[i * D + d] / norms[i];
  }
  std::vector<T> s(static_cast<std::size_t>(R * R));
  for (std::int64_t i = 0; i < R; ++i) {
    s[i * R + i] = T(1);
    for (std::int64_t j = i + 1; j < R; ++j) {
      T dot = T(0);
      for (std::int64_t d = 0; d < D; ++d) dot += (*unit)[i * D + d] * (*unit)[j * D + d];
      s[i * R + j] = s[j * R + i] = dot;
    }
  }
  return tg::make_result<T>({R, R}, std::move(s), {z}, "similarity_matrix", [R, D, unit, norms](tg::TensorImpl<T>& self) {
    const auto& g = self.grad;
    const auto& u = *unit;
    // dU = (G + G^T) U with the diagonal held fixed, then project out the
    // radial component and divide by the row norm.
    std::vector<T> dz(static_cast<std::size_t>(R * D), T(0));
    for (std::int64_t i = 0; i < R; ++i) {
      T* di = dz.data() + i * D;
      for (std::int64_t j = 0; j < R; ++j) {
        if (j == i) continue;
        const T w = g[i * R + j] + g[j * R + i];
        const T* uj = u.data() + j * D;
        for (std::int64_t d = 0; d < D; ++d) di[d] += w * uj[d];
      }
      const T* ui = u.data() + i * D;
      T radial = T(0);
      for (std::int64_t d = 0; d < D; ++d) radial += di[d] * ui[d];
      for (std::int64_t d = 0; d < D; ++d) di[d] = (di[d] - radial * ui[d]) / norms[i];
    }
    tg::accumulate<T>(*self.parents[0], dz);
  });
}

template <typename T>
tg::Tensor<T> nt_xent_from_similarity(const tg::Tensor<T>& similarity, const std::vector<std::size_t>& partner,
                                      double temperature) {
  if (!(temperature > 0.0)) throw ContractError("nt_xent: temperature must be positive");
  if (similarity.rank() != 2 || similarity.dim(0) != similarity.dim(1)) {
    throw DimensionError("nt_xent expects a square similarity matrix, got " + tg::shape_str(similarity.shape()));
  }
  const std::int64_t R = similarity.dim(0);
  if (static_cast<std::int64_t>(partner.size()) != R) throw ContractError("nt_xent: pairing size mismatch");
  const T inv_tau = static_cast<T>(1.0 / temperature);
  const auto s = similarity.data();
  // softmax over k != i of S[i][k] / tau, saved for the backward pass
  auto weights = std::make_shared<std::vector<T>>(static_cast<std::size_t>(R * R), T(0));
  T total = T(0);
  for (std::int64_t i = 0; i < R; ++i) {
    const T* row = s.data() + i * R;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::int64_t k = 0; k < R; ++k)
      if (k != i) mx = std::max(mx, row[k] * inv_tau);
    T se = T(0);
    for (std::int64_t k = 0; k < R; ++k)
      if (k != i) se += std::exp(row[k] * inv_tau - mx);
    const T lse = mx + std::log(se);
    total += lse - row[partner[i]] * inv_tau;
    T* w = weights->data() + i * R;
    for (std::int64_t k = 0; k < R; ++k)
      if (k != i) w[k] = std::exp(row[k] * inv_tau - lse);
  }
  const T loss = total / static_cast<T>(R);
  return tg::make_result<T>({1}, {loss}, {similarity}, "nt_xent", [R, inv_tau, weights, partner](tg::TensorImpl<T>& self) {
    std::vector<T> ds(*weights);
    const T scale = self.grad[0] * inv_tau / static_cast<T>(R);
    for (std::int64_t i = 0; i < R; ++i) {
      ds[i * R + partner[i]] -= T(1);
      for (std::int64_t k = 0; k < R; ++k) ds[i * R + k] *= scale;
    }
    tg::accumulate<T>(*self.parents[0], ds);
  });
}

template <typename T>
tg::Tensor<T> nt_xent(const ContrastiveBatch<T>& batch) {
  batch.validate();
  return nt_xent_from_similarity(similarity_matrix(batch.z), batch.partner, batch.temperature);
}

long double nt_xent_reference(const std::vector<std::vector<double>>& z, const std::vector<std::size_t>& partner,
                              double temperature) {
  const std::size_t rows = z.size();
  auto cosine = [&](std::size_t a, std::size_t b) {
    long double dot = 0, na = 0, nb = 0;
    for (std::size_t d = 0; d < z[a].size(); ++d) {
      dot += static_cast<long double>(z[a][d]) * z[b][d];
      na += static_cast<long double>(z[a][d]) * z[a][d];
      nb += static_cast<long double>(z[b][d]) * z[b][d];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };
  const long double tau = temperature;
  long double total = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    long double denom = 0;
    for (std::size_t k = 0; k < rows; ++k)
      if (k != i) denom += std::exp(cosine(i, k) / tau);
    total += -std::log(std::exp(cosine(i, partner[i]) / tau) / denom);
  }
  return total / static_cast<long double>(rows);
}

std::vector<DenominatorTerm> denominator_terms(std::size_t anchor, const std::vector<std::size_t>& partner) {
  std::vector<DenominatorTerm> terms;
  for (std::size_t k = 0; k < partner.size(); ++k)
    if (k != anchor) terms.push_back({k, k == partner[anchor]});
  return terms;
}

std::vector<double> anchor_weights(const std::vector<double>& similarity_row, std::size_t anchor, double temperature) {
  double mx = -INFINITY;
  for (std::size_t k = 0; k < similarity_row.size(); ++k)
    if (k != anchor) mx = std::max(mx, similarity_row[k] / temperature);
  std::vector<double> w;
  double total = 0.0;
  for (std::size_t k = 0; k < similarity_row.size(); ++k) {
    if (k == anchor) continue;
    w.push_back(std::exp(similarity_row[k] / temperature - mx));
    total += w.back();
  }
  for (auto& v : w) v /= total;
  return w;
}

template struct ContrastiveBatch<float>;
template struct ContrastiveBatch<double>;
template tg::Tensor<float> similarity_matrix<float>(const tg::Tensor<float>&);
template tg::Tensor<double> similarity_matrix<double>(const tg::Tensor<double>&);
template tg::Tensor<float> nt_xent<float>(const ContrastiveBatch<float>&);
template tg::Tensor<double> nt_xent<double>(const ContrastiveBatch<double>&);
template tg::Tensor<float> nt_xent_from_similarity<float>(const tg::Tensor<float>&, const std::vector<std::size_t>&, double);
template tg::Tensor<double> nt_xent_from_similarity<double>(const tg::Tensor<double>&, const std::vector<std::size_t>&, double);

}  // namespace cpath::contrastive
