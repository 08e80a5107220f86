#pragma once

#include <cstddef>
#include <vector>

#include "cpath/tensor.hpp"

namespace cpath::contrastive {

/// Projections of 2N views. partner[i] is the row holding the other view of
/// row i's source image; by default rows 2k and 2k+1 are paired.
template <typename T>
struct ContrastiveBatch {
  tg::Tensor<T> z;
  std::vector<std::size_t> partner;
  double temperature = 0.1;

  static ContrastiveBatch adjacent_pairs(tg::Tensor<T> z, double temperature);
  /// Throws ContractError unless partner is a perfect matching without fixed points.
  void validate() const;
};

/// Pairing where rows 2k and 2k+1 are the two views of image k.
std::vector<std::size_t> adjacent_pairing(std::size_t rows);

/// Cosine similarities of all row pairs; the diagonal is exactly one.
template <typename T>
tg::Tensor<T> similarity_matrix(const tg::Tensor<T>& z);

/// Mean over anchors i of -log(exp(S[i][p(i)]/t) / sum_{k != i} exp(S[i][k]/t)),
/// evaluated with a max-shifted log-sum-exp.
template <typename T>
tg::Tensor<T> nt_xent(const ContrastiveBatch<T>& batch);

/// Same loss from a precomputed [2N,2N] similarity matrix.
template <typename T>
tg::Tensor<T> nt_xent_from_similarity(const tg::Tensor<T>& similarity, const std::vector<std::size_t>& partner,
                                      double temperature);

/// Direct double loop over Eq.-style terms in long double, without autodiff.
/// Test oracle; intended for small batches.
long double nt_xent_reference(const std::vector<std::vector<double>>& z, const std::vector<std::size_t>& partner,
                              double temperature);

struct DenominatorTerm {
  std::size_t row;
  bool positive;
};

/// Rows that enter anchor i's denominator: every row except i itself.
std::vector<DenominatorTerm> denominator_terms(std::size_t anchor, const std::vector<std::size_t>& partner);

/// Softmax weights an anchor assigns to its denominator rows, in the order of
/// denominator_terms.
std::vector<double> anchor_weights(const std::vector<double>& similarity_row, std::size_t anchor, double temperature);

}  // namespace cpath::contrastive
