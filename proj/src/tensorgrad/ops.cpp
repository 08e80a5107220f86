#include "cpath/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "cpath/parallel.hpp"

namespace cpath::tg {

namespace {

thread_local ConvAlgo t_conv_algo = ConvAlgo::im2col;

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
  }
}

struct ConvGeometry {
  std::int64_t n, c, h, w, f, kh, kw, ho, wo, stride, pad;
  std::int64_t ckk() const { return c * kh * kw; }
  std::int64_t positions() const { return ho * wo; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                           int stride, int padding) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  require_rank(bias, 1, "conv2d", "bias");
  if (stride < 1) throw ContractError("conv2d: stride must be positive");
  if (padding < 0) throw ContractError("conv2d: padding must be non-negative");
  ConvGeometry g{};
  g.n = input.dim(0);
  g.c = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.f = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = stride;
  g.pad = padding;
  if (weight.dim(1) != g.c) {
    throw DimensionError("conv2d: input channels (axis 1 of input) = " + std::to_string(g.c) +
                         " but weight axis 1 = " + std::to_string(weight.dim(1)));
  }
  if (bias.dim(0) != g.f) {
    throw DimensionError("conv2d: bias axis 0 = " + std::to_string(bias.dim(0)) +
                         " but weight axis 0 (filters) = " + std::to_string(g.f));
  }
  if (g.kh > g.h + 2 * g.pad) {
    throw DimensionError("conv2d: kernel height (weight axis 2) exceeds padded input height (input axis 2)");
  }
  if (g.kw > g.w + 2 * g.pad) {
    throw DimensionError("conv2d: kernel width (weight axis 3) exceeds padded input width (input axis 3)");
  }
  g.ho = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.kw) / g.stride + 1;
  return g;
}

// cols[r][p], r = (c*kh + ki)*kw + kj, p = oh*wo + ow; zero where padded.
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* cols) {
  const std::int64_t P = g.positions();
  for (std::int64_t c = 0; c < g.c; ++c) {
    const T* xc = x + c * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj) {
        T* row = cols + ((c * g.kh + ki) * g.kw + kj) * P;
        for (std::int64_t oh = 0; oh < g.ho; ++oh) {
          const std::int64_t ih = oh * g.stride - g.pad + ki;
          T* out = row + oh * g.wo;
          if (ih < 0 || ih >= g.h) {
            std::fill(out, out + g.wo, T(0));
            continue;
          }
          const T* xr = xc + ih * g.w;
          for (std::int64_t ow = 0; ow < g.wo; ++ow) {
            const std::int64_t iw = ow * g.stride - g.pad + kj;
            out[ow] = (iw >= 0 && iw < g.w) ? xr[iw] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* cols, T* dx) {
  const std::int64_t P = g.positions();
  for (std::int64_t c = 0; c < g.c; ++c) {
    T* dc = dx + c * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj) {
        const T* row = cols + ((c * g.kh + ki) * g.kw + kj) * P;
        for (std::int64_t oh = 0; oh < g.ho; ++oh) {
          const std::int64_t ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.h) continue;
          for (std::int64_t ow = 0; ow < g.wo; ++ow) {
            const std::int64_t iw = ow * g.stride - g.pad + kj;
            if (iw >= 0 && iw < g.w) dc[ih * g.w + iw] += row[oh * g.wo + ow];
          }
        }
      }
    }
  }
}

template <typename T>
T padded_input(const ConvGeometry& g, const T* x, std::int64_t c, std::int64_t ih, std::int64_t iw) {
  if (ih < 0 || ih >= g.h || iw < 0 || iw >= g.w) return T(0);
  return x[(c * g.h + ih) * g.w + iw];
}

// Reference loops. Products and summation order mirror the im2col path.
template <typename T>
void conv_forward_direct(const ConvGeometry& g, const T* x, const T* w, const T* b, T* y) {
  const std::int64_t ckk = g.ckk();
  for (std::int64_t n = 0; n < g.n; ++n) {
    const T* xn = x + n * g.c * g.h * g.w;
    for (std::int64_t f = 0; f < g.f; ++f) {
      for (std::int64_t oh = 0; oh < g.ho; ++oh) {
        for (std::int64_t ow = 0; ow < g.wo; ++ow) {
          T s = T(0);
          for (std::int64_t c = 0; c < g.c; ++c) {
            for (std::int64_t ki = 0; ki < g.kh; ++ki) {
              for (std::int64_t kj = 0; kj < g.kw; ++kj) {
                const T xv = padded_input(g, xn, c, oh * g.stride - g.pad + ki, ow * g.stride - g.pad + kj);
                s += w[f * ckk + (c * g.kh + ki) * g.kw + kj] * xv;
              }
            }
          }
          y[((n * g.f + f) * g.ho + oh) * g.wo + ow] = s;
        }
      }
    }
  }
  for (std::int64_t n = 0; n < g.n; ++n) {
    for (std::int64_t f = 0; f < g.f; ++f) {
      T* yf = y + (n * g.f + f) * g.positions();
      for (std::int64_t p = 0; p < g.positions(); ++p) yf[p] += b[f];
    }
  }
}

template <typename T>
void conv_backward_direct(const ConvGeometry& g, const T* x, const T* w, const T* gy, T* dw, T* dx) {
  const std::int64_t ckk = g.ckk();
  const std::int64_t P = g.positions();
  if (dw) {
    for (std::int64_t f = 0; f < g.f; ++f) {
      for (std::int64_t c = 0; c < g.c; ++c) {
        for (std::int64_t ki = 0; ki < g.kh; ++ki) {
          for (std::int64_t kj = 0; kj < g.kw; ++kj) {
            T s = T(0);
            for (std::int64_t n = 0; n < g.n; ++n) {
              const T* xn = x + n * g.c * g.h * g.w;
              for (std::int64_t oh = 0; oh < g.ho; ++oh) {
                for (std::int64_t ow = 0; ow < g.wo; ++ow) {
                  const T xv = padded_input(g, xn, c, oh * g.stride - g.pad + ki, ow * g.stride - g.pad + kj);
                  s += xv * gy[(n * g.f + f) * P + oh * g.wo + ow];
                }
              }
            }
            dw[f * ckk + (c * g.kh + ki) * g.kw + kj] = s;
          }
        }
      }
    }
  }
  if (dx) {
    for (std::int64_t n = 0; n < g.n; ++n) {
      T* dxn = dx + n * g.c * g.h * g.w;
      for (std::int64_t c = 0; c < g.c; ++c) {
        for (std::int64_t ki = 0; ki < g.kh; ++ki) {
          for (std::int64_t kj = 0; kj < g.kw; ++kj) {
            const std::int64_t r = (c * g.kh + ki) * g.kw + kj;
            for (std::int64_t oh = 0; oh < g.ho; ++oh) {
              for (std::int64_t ow = 0; ow < g.wo; ++ow) {
                T s = T(0);
                for (std::int64_t f = 0; f < g.f; ++f) s += w[f * ckk + r] * gy[(n * g.f + f) * P + oh * g.wo + ow];
                const std::int64_t ih = oh * g.stride - g.pad + ki;
                const std::int64_t iw = ow * g.stride - g.pad + kj;
                if (ih >= 0 && ih < g.h && iw >= 0 && iw < g.w) dxn[(c * g.h + ih) * g.w + iw] += s;
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void transpose(const T* src, std::int64_t rows, std::int64_t cols, T* dst) {
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

}  // namespace

void set_conv_algo(ConvAlgo algo) {
  t_conv_algo = algo;
}

ConvAlgo conv_algo() {
  return t_conv_algo;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                 int padding) {
  const ConvGeometry g = conv_geometry(input, weight, bias, stride, padding);
  const std::int64_t ckk = g.ckk();
  const std::int64_t P = g.positions();
  const std::int64_t in_size = g.c * g.h * g.w;
  std::vector<T> y(static_cast<std::size_t>(g.n * g.f * P));
  const ConvAlgo algo = t_conv_algo;
  const bool record = grad_enabled() &&
                      (input.requires_grad() || weight.requires_grad() || bias.requires_grad());

  std::shared_ptr<std::vector<T>> cols;
  if (algo == ConvAlgo::direct) {
    conv_forward_direct(g, input.data().data(), weight.data().data(), bias.data().data(), y.data());
  } else {
    cols = std::make_shared<std::vector<T>>(static_cast<std::size_t>(g.n * ckk * P));
    const T* x = input.data().data();
    const T* w = weight.data().data();
    const T* b = bias.data().data();
    T* colp = cols->data();
    parallel_for(static_cast<std::size_t>(g.n), [&](std::size_t n) {
      T* cn = colp + n * ckk * P;
      im2col(g, x + n * in_size, cn);
      T* yn = y.data() + n * g.f * P;
      detail::gemm<T>(g.f, P, ckk, w, ckk, 1, cn, P, yn, P, false);
      for (std::int64_t f = 0; f < g.f; ++f) {
        T* yf = yn + f * P;
        for (std::int64_t p = 0; p < P; ++p) yf[p] += b[f];
      }
    });
    if (!record) cols.reset();
  }

  return make_result<T>(
      {g.n, g.f, g.ho, g.wo}, std::move(y), {input, weight, bias}, "conv2d",
      [g, algo, cols](TensorImpl<T>& self) {
        auto& in = *self.parents[0];
        auto& wt = *self.parents[1];
        auto& bs = *self.parents[2];
        const std::int64_t ckk = g.ckk();
        const std::int64_t P = g.positions();
        const std::int64_t in_size = g.c * g.h * g.w;
        const T* gy = self.grad.data();

        if (bs.requires_grad) {
          std::vector<T> db(static_cast<std::size_t>(g.f), T(0));
          for (std::int64_t n = 0; n < g.n; ++n)
            for (std::int64_t f = 0; f < g.f; ++f) {
              const T* gf = gy + (n * g.f + f) * P;
              for (std::int64_t p = 0; p < P; ++p) db[f] += gf[p];
            }
          accumulate<T>(bs, db);
        }

        std::vector<T> dw;
        std::vector<T> dx;
        if (wt.requires_grad) dw.assign(static_cast<std::size_t>(g.f * ckk), T(0));
        if (in.requires_grad) dx.assign(in.data.size(), T(0));

        if (algo == ConvAlgo::direct) {
          conv_backward_direct(g, in.data.data(), wt.data.data(), gy, dw.empty() ? nullptr : dw.data(),
                               dx.empty() ? nullptr : dx.data());
        } else {
          if (!dw.empty()) {
            // dW^T[ckk][f] accumulates cols_n[ckk][p] * g_n^T[p][f] over samples in order.
            std::vector<T> dwt(static_cast<std::size_t>(ckk * g.f), T(0));
            std::vector<T> gt(static_cast<std::size_t>(P * g.f));
            for (std::int64_t n = 0; n < g.n; ++n) {
              transpose(gy + n * g.f * P, g.f, P, gt.data());
              detail::gemm<T>(ckk, g.f, P, cols->data() + n * ckk * P, P, 1, gt.data(), g.f, dwt.data(), g.f,
                              true);
            }
            transpose(dwt.data(), ckk, g.f, dw.data());
          }
          if (!dx.empty()) {
            const T* w = wt.data.data();
            parallel_for(static_cast<std::size_t>(g.n), [&](std::size_t n) {
              std::vector<T> dcols(static_cast<std::size_t>(ckk * P));
              detail::gemm<T>(ckk, P, g.f, w, 1, ckk, gy + n * g.f * P, P, dcols.data(), P, false);
              col2im_add(g, dcols.data(), dx.data() + n * in_size);
            });
          }
        }
        if (!dw.empty()) accumulate<T>(wt, dw);
        if (!dx.empty()) accumulate<T>(in, dx);
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> y(x.numel());
  const auto xs = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xs[i] > T(0) ? xs[i] : T(0);
  return make_result<T>(x.shape(), std::move(y), {x}, "relu", [](TensorImpl<T>& self) {
    auto& in = *self.parents[0];
    std::vector<T> dx(in.data.size());
    // Subgradient at exactly zero is taken as zero.
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = in.data[i] > T(0) ? self.grad[i] : T(0);
    accumulate<T>(in, dx);
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(x, 2, "linear", "input");
  require_rank(weight, 2, "linear", "weight");
  require_rank(bias, 1, "linear", "bias");
  const std::int64_t N = x.dim(0), D = x.dim(1), E = weight.dim(1);
  if (weight.dim(0) != D) {
    throw DimensionError("linear: input axis 1 = " + std::to_string(D) + " but weight axis 0 = " +
                         std::to_string(weight.dim(0)));
  }
  if (bias.dim(0) != E) {
    throw DimensionError("linear: bias axis 0 = " + std::to_string(bias.dim(0)) +
                         " but weight axis 1 = " + std::to_string(E));
  }
  std::vector<T> y(static_cast<std::size_t>(N * E));
  detail::gemm<T>(N, E, D, x.data().data(), D, 1, weight.data().data(), E, y.data(), E, false);
  const auto b = bias.data();
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t e = 0; e < E; ++e) y[n * E + e] += b[e];
  return make_result<T>({N, E}, std::move(y), {x, weight, bias}, "linear", [N, D, E](TensorImpl<T>& self) {
    auto& in = *self.parents[0];
    auto& wt = *self.parents[1];
    auto& bs = *self.parents[2];
    const T* g = self.grad.data();
    if (in.requires_grad) {
      std::vector<T> wtT(static_cast<std::size_t>(E * D));
      transpose(wt.data.data(), D, E, wtT.data());
      std::vector<T> dx(static_cast<std::size_t>(N * D));
      detail::gemm<T>(N, D, E, g, E, 1, wtT.data(), D, dx.data(), D, false);
      accumulate<T>(in, dx);
    }
    if (wt.requires_grad) {
      std::vector<T> dw(static_cast<std::size_t>(D * E));
      detail::gemm<T>(D, E, N, in.data.data(), 1, D, g, E, dw.data(), E, false);
      accumulate<T>(wt, dw);
    }
    if (bs.requires_grad) {
      std::vector<T> db(static_cast<std::size_t>(E), T(0));
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t e = 0; e < E; ++e) db[e] += g[n * E + e];
      accumulate<T>(bs, db);
    }
  });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require_rank(x, 4, "global_avg_pool", "input");
  const std::int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  std::vector<T> y(static_cast<std::size_t>(N * C));
  const auto xs = x.data();
  for (std::int64_t i = 0; i < N * C; ++i) {
    T s = T(0);
    for (std::int64_t p = 0; p < HW; ++p) s += xs[i * HW + p];
    y[i] = s / static_cast<T>(HW);
  }
  return make_result<T>({N, C}, std::move(y), {x}, "global_avg_pool", [N, C, HW](TensorImpl<T>& self) {
    auto& in = *self.parents[0];
    std::vector<T> dx(in.data.size());
    const T inv = T(1) / static_cast<T>(HW);
    for (std::int64_t i = 0; i < N * C; ++i) {
      const T gi = self.grad[i] * inv;
      std::fill(dx.begin() + i * HW, dx.begin() + (i + 1) * HW, gi);
    }
    accumulate<T>(in, dx);
  });
}

template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& x, T eps) {
  require_rank(x, 2, "l2_normalize", "input");
  const std::int64_t N = x.dim(0), D = x.dim(1);
  std::vector<T> y(x.numel());
  std::vector<T> denom(static_cast<std::size_t>(N));
  const auto xs = x.data();
  for (std::int64_t n = 0; n < N; ++n) {
    T ss = T(0);
    for (std::int64_t d = 0; d < D; ++d) ss += xs[n * D + d] * xs[n * D + d];
    const T norm = std::sqrt(ss);
    denom[n] = norm > eps ? norm : eps;
    for (std::int64_t d = 0; d < D; ++d) y[n * D + d] = xs[n * D + d] / denom[n];
  }
  auto saved = std::make_shared<std::vector<T>>(y);
  return make_result<T>(x.shape(), std::move(y), {x}, "l2_normalize",
                        [N, D, eps, denom, saved](TensorImpl<T>& self) {
                          auto& in = *self.parents[0];
                          std::vector<T> dx(in.data.size());
                          const auto& yv = *saved;
                          for (std::int64_t n = 0; n < N; ++n) {
                            const T* g = self.grad.data() + n * D;
                            const T* yr = yv.data() + n * D;
                            T* d = dx.data() + n * D;
                            if (denom[n] > eps) {
                              T dot = T(0);
                              for (std::int64_t k = 0; k < D; ++k) dot += yr[k] * g[k];
                              for (std::int64_t k = 0; k < D; ++k) d[k] = (g[k] - yr[k] * dot) / denom[n];
                            } else {
                              for (std::int64_t k = 0; k < D; ++k) d[k] = g[k] / eps;
                            }
                          }
                          accumulate<T>(in, dx);
                        });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  return make_result<T>(a.shape(), std::move(y), {a, b}, "add", [](TensorImpl<T>& self) {
    accumulate<T>(*self.parents[0], self.grad);
    accumulate<T>(*self.parents[1], self.grad);
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  return make_result<T>(a.shape(), std::move(y), {a, b}, "mul", [](TensorImpl<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    std::vector<T> d(self.grad.size());
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = self.grad[i] * pb.data[i];
      accumulate<T>(pa, d);
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = self.grad[i] * pa.data[i];
      accumulate<T>(pb, d);
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * factor;
  return make_result<T>(a.shape(), std::move(y), {a}, "scale", [factor](TensorImpl<T>& self) {
    std::vector<T> d(self.grad.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = self.grad[i] * factor;
    accumulate<T>(*self.parents[0], d);
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = T(0);
  for (T v : a.data()) s += v;
  return make_result<T>({1}, {s}, {a}, "sum", [](TensorImpl<T>& self) {
    auto& in = *self.parents[0];
    std::vector<T> d(in.data.size(), self.grad[0]);
    accumulate<T>(in, d);
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  T s = T(0);
  for (T v : a.data()) s += v;
  const T n = static_cast<T>(a.numel());
  return make_result<T>({1}, {s / n}, {a}, "mean", [n](TensorImpl<T>& self) {
    auto& in = *self.parents[0];
    std::vector<T> d(in.data.size(), self.grad[0] / n);
    accumulate<T>(in, d);
  });
}

template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& a, std::span<const T> weights) {
  if (weights.size() != a.numel()) {
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(a.numel()) + " values");
  }
  T s = T(0);
  for (std::size_t i = 0; i < weights.size(); ++i) s += a[i] * weights[i];
  std::vector<T> w(weights.begin(), weights.end());
  return make_result<T>({1}, {s}, {a}, "weighted_sum", [w](TensorImpl<T>& self) {
    std::vector<T> d(w.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = w[i] * self.grad[0];
    accumulate<T>(*self.parents[0], d);
  });
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy", "logits");
  const std::int64_t N = logits.dim(0), K = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != N) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(N) + " rows");
  }
  const auto z = logits.data();
  auto probs = std::make_shared<std::vector<T>>(static_cast<std::size_t>(N * K));
  T total = T(0);
  for (std::int64_t n = 0; n < N; ++n) {
    const int label = labels[n];
    if (label < 0 || label >= K) throw ContractError("softmax_cross_entropy: label out of range");
    T mx = z[n * K];
    for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, z[n * K + k]);
    T se = T(0);
    for (std::int64_t k = 0; k < K; ++k) se += std::exp(z[n * K + k] - mx);
    const T lse = mx + std::log(se);
    total += lse - z[n * K + label];
    for (std::int64_t k = 0; k < K; ++k) (*probs)[n * K + k] = std::exp(z[n * K + k] - lse);
  }
  std::vector<int> lab(labels.begin(), labels.end());
  return make_result<T>({1}, {total / static_cast<T>(N)}, {logits}, "softmax_cross_entropy",
                        [N, K, probs, lab](TensorImpl<T>& self) {
                          std::vector<T> d(*probs);
                          const T s = self.grad[0] / static_cast<T>(N);
                          for (std::int64_t n = 0; n < N; ++n) {
                            d[n * K + lab[n]] -= T(1);
                            for (std::int64_t k = 0; k < K; ++k) d[n * K + k] *= s;
                          }
                          accumulate<T>(*self.parents[0], d);
                        });
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, std::span<const T> target) {
  if (pred.numel() != target.size() || target.empty()) {
    throw DimensionError("l1_loss: " + std::to_string(pred.numel()) + " predictions for " +
                         std::to_string(target.size()) + " targets");
  }
  T s = T(0);
  for (std::size_t i = 0; i < target.size(); ++i) s += std::abs(pred[i] - target[i]);
  const T n = static_cast<T>(target.size());
  std::vector<T> t(target.begin(), target.end());
  return make_result<T>({1}, {s / n}, {pred}, "l1_loss", [t, n](TensorImpl<T>& self) {
    auto& in = *self.parents[0];
    std::vector<T> d(t.size());
    const T g = self.grad[0] / n;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const T diff = in.data[i] - t[i];
      d[i] = diff > T(0) ? g : (diff < T(0) ? -g : T(0));
    }
    accumulate<T>(in, d);
  });
}

#define CPATH_INSTANTIATE(T)                                                                          \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);       \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                        \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> global_avg_pool<T>(const Tensor<T>&);                                             \
  template Tensor<T> l2_normalize<T>(const Tensor<T>&, T);                                             \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                                    \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                         \
  template Tensor<T> mean<T>(const Tensor<T>&);                                                        \
  template Tensor<T> weighted_sum<T>(const Tensor<T>&, std::span<const T>);                            \
  template Tensor<T> softmax_cross_entropy<T>(const Tensor<T>&, std::span<const int>);                 \
  template Tensor<T> l1_loss<T>(const Tensor<T>&, std::span<const T>);

CPATH_INSTANTIATE(float)
CPATH_INSTANTIATE(double)

#undef CPATH_INSTANTIATE

}  // namespace cpath::tg
