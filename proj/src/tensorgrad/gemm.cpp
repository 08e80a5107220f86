#include <cstdint>

#include "cpath/ops.hpp"

namespace cpath::tg::detail {

namespace {

// Register tile of 4 rows by JB columns. Each C element is a single running
// sum over k, matching the naive triple loop exactly.
template <typename T, int JB>
void tile4(std::int64_t i, std::int64_t j, std::int64_t K, const T* a, std::int64_t a_row,
           std::int64_t a_col, const T* b, std::int64_t ldb, T* c, std::int64_t ldc,
           bool accumulate) {
  T c0[JB], c1[JB], c2[JB], c3[JB];
  T* r0 = c + i * ldc + j;
  T* r1 = r0 + ldc;
  T* r2 = r1 + ldc;
  T* r3 = r2 + ldc;
  if (accumulate) {
    for (int q = 0; q < JB; ++q) {
      c0[q] = r0[q];
      c1[q] = r1[q];
      c2[q] = r2[q];
      c3[q] = r3[q];
    }
  } else {
    for (int q = 0; q < JB; ++q) c0[q] = c1[q] = c2[q] = c3[q] = T(0);
  }
  const T* a0 = a + i * a_row;
  const T* a1 = a0 + a_row;
  const T* a2 = a1 + a_row;
  const T* a3 = a2 + a_row;
  for (std::int64_t k = 0; k < K; ++k) {
    const T* bk = b + k * ldb + j;
    const T v0 = a0[k * a_col];
    const T v1 = a1[k * a_col];
    const T v2 = a2[k * a_col];
    const T v3 = a3[k * a_col];
    for (int q = 0; q < JB; ++q) {
      const T bv = bk[q];
      c0[q] += v0 * bv;
      c1[q] += v1 * bv;
      c2[q] += v2 * bv;
      c3[q] += v3 * bv;
    }
  }
  for (int q = 0; q < JB; ++q) {
    r0[q] = c0[q];
    r1[q] = c1[q];
    r2[q] = c2[q];
    r3[q] = c3[q];
  }
}

template <typename T, int JB>
void row1(std::int64_t i, std::int64_t j, std::int64_t K, const T* a, std::int64_t a_row,
          std::int64_t a_col, const T* b, std::int64_t ldb, T* c, std::int64_t ldc,
          bool accumulate) {
  T acc[JB];
  T* r = c + i * ldc + j;
  for (int q = 0; q < JB; ++q) acc[q] = accumulate ? r[q] : T(0);
  const T* ai = a + i * a_row;
  for (std::int64_t k = 0; k < K; ++k) {
    const T* bk = b + k * ldb + j;
    const T v = ai[k * a_col];
    for (int q = 0; q < JB; ++q) acc[q] += v * bk[q];
  }
  for (int q = 0; q < JB; ++q) r[q] = acc[q];
}

template <typename T>
void scalar_cell(std::int64_t i, std::int64_t j, std::int64_t K, const T* a, std::int64_t a_row,
                 std::int64_t a_col, const T* b, std::int64_t ldb, T* c, std::int64_t ldc,
                 bool accumulate) {
  T s = accumulate ? c[i * ldc + j] : T(0);
  const T* ai = a + i * a_row;
  for (std::int64_t k = 0; k < K; ++k) s += ai[k * a_col] * b[k * ldb + j];
  c[i * ldc + j] = s;
}

template <typename T, int JB>
std::int64_t column_blocks(std::int64_t i, std::int64_t rows, std::int64_t j, std::int64_t N,
                           std::int64_t K, const T* a, std::int64_t a_row, std::int64_t a_col,
                           const T* b, std::int64_t ldb, T* c, std::int64_t ldc, bool acc) {
  for (; j + JB <= N; j += JB) {
    if (rows == 4) {
      tile4<T, JB>(i, j, K, a, a_row, a_col, b, ldb, c, ldc, acc);
    } else {
      for (std::int64_t r = 0; r < rows; ++r) row1<T, JB>(i + r, j, K, a, a_row, a_col, b, ldb, c, ldc, acc);
    }
  }
  return j;
}

}  // namespace

template <typename T>
void gemm(std::int64_t M, std::int64_t N, std::int64_t K, const T* a, std::int64_t a_row,
          std::int64_t a_col, const T* b, std::int64_t ldb, T* c, std::int64_t ldc,
          bool accumulate) {
  constexpr int kWide = sizeof(T) == 4 ? 32 : 16;
  constexpr int kMid = kWide / 2;
  constexpr int kNarrow = kWide / 4;
  for (std::int64_t i = 0; i < M; i += 4) {
    const std::int64_t rows = (M - i) >= 4 ? 4 : (M - i);
    std::int64_t j = 0;
    j = column_blocks<T, kWide>(i, rows, j, N, K, a, a_row, a_col, b, ldb, c, ldc, accumulate);
    j = column_blocks<T, kMid>(i, rows, j, N, K, a, a_row, a_col, b, ldb, c, ldc, accumulate);
    j = column_blocks<T, kNarrow>(i, rows, j, N, K, a, a_row, a_col, b, ldb, c, ldc, accumulate);
    for (; j < N; ++j) {
      for (std::int64_t r = 0; r < rows; ++r) scalar_cell(i + r, j, K, a, a_row, a_col, b, ldb, c, ldc, accumulate);
    }
  }
}

template void gemm<float>(std::int64_t, std::int64_t, std::int64_t, const float*, std::int64_t,
                          std::int64_t, const float*, std::int64_t, float*, std::int64_t, bool);
template void gemm<double>(std::int64_t, std::int64_t, std::int64_t, const double*, std::int64_t,
                           std::int64_t, const double*, std::int64_t, double*, std::int64_t, bool);

}  // namespace cpath::tg::detail
