#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cpath/tensor.hpp"

namespace cpath::tg {

enum class ConvAlgo { im2col, direct };

/// Selects the convolution path for the current thread. Both paths sum in the
/// same order and agree bitwise.
void set_conv_algo(ConvAlgo algo);
ConvAlgo conv_algo();

/// Cross-correlation of input [N,C,H,W] with weight [F,C,kh,kw] plus bias [F].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride, int padding);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// x [N,D] times weight [D,E] plus bias [E].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Mean over the spatial axes of [N,C,H,W], giving [N,C].
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

/// Each row of [N,D] divided by max(||row||, eps).
template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& x, T eps);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

template <typename T>
Tensor<T> sum(const Tensor<T>& a);

template <typename T>
Tensor<T> mean(const Tensor<T>& a);

/// Mean softmax cross-entropy of logits [N,K] against integer labels.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

/// Mean absolute error between predictions [N,1] (or [N]) and targets.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, std::span<const T> target);

/// Elementwise sum with a fixed weight vector; handy as a scalar probe of an
/// op's output in gradient checks.
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& a, std::span<const T> weights);

namespace detail {

/// C[M,N] (+)= A * B where A(i,k) = a[i*a_row + k*a_col] and B is row-major
/// with leading dimension ldb. Every C element is accumulated sequentially
/// over k, so the result does not depend on blocking.
template <typename T>
void gemm(std::int64_t M, std::int64_t N, std::int64_t K, const T* a, std::int64_t a_row,
          std::int64_t a_col, const T* b, std::int64_t ldb, T* c, std::int64_t ldc,
          bool accumulate);

}  // namespace detail

}  // namespace cpath::tg
