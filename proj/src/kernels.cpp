// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include "cacti/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <type_traits>
#include <limits>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cacti::kernels {
namespace {

// [begin, end) slice of `n` items owned by the calling thread.
inline std::pair<std::size_t, std::size_t> thread_range(std::size_t n) {
#ifdef _OPENMP
  const auto t = static_cast<std::size_t>(omp_get_thread_num());
  const auto nt = static_cast<std::size_t>(omp_get_num_threads());
#else
  const std::size_t t = 0;
  const std::size_t nt = 1;
#endif
  const std::size_t chunk = (n + nt - 1) / nt;
  const std::size_t begin = std::min(n, t * chunk);
  return {begin, std::min(n, begin + chunk)};
}

template <class T>
constexpr T kInvSqrt2 = T(0.70710678118654752440);
template <class T>
constexpr T kInvSqrt2Pi = T(0.39894228040143267794);

// Branch-free float exp (Cephes range reduction + degree-6 polynomial,
// ~2 ulp) so the GELU and softmax loops vectorize. Doubles use libm.
inline float exp_f(float x) {
  x = x < -87.0f ? -87.0f : x;
  x = x > 88.0f ? 88.0f : x;
  const float fx = std::floor(x * 1.44269504088896341f + 0.5f);
  x -= fx * 0.693359375f;
  x -= fx * -2.12194440e-4f;
  const float z = x * x;
  float y = 1.9875691500e-4f;
  y = y * x + 1.3981999507e-3f;
  y = y * x + 8.3334519073e-3f;
  y = y * x + 4.1665795894e-2f;
  y = y * x + 1.6666665459e-1f;
  y = y * x + 5.0000001201e-1f;
  y = y * z + x + 1.0f;
  const auto bits = static_cast<std::uint32_t>(static_cast<std::int32_t>(fx) + 127) << 23;
  return y * std::bit_cast<float>(bits);
}

template <class T>
inline T exp_t(T x) {
  if constexpr (std::is_same_v<T, float>) {
    return exp_f(x);
  } else {
    return std::exp(x);
  }
}

// Standard normal CDF Φ(x) = ½·erfc(−x/√2). The float path uses a
// Chebyshev-fitted erfc with relative error below 1.2e-7 over the real line.
template <class T>
inline T normal_cdf(T x) {
  if constexpr (std::is_same_v<T, float>) {
    const float u = -x * kInvSqrt2<float>;
    const float a = std::abs(u);
    const float t = 1.0f / (1.0f + 0.5f * a);
    float p = 0.17087277f;
    p = p * t - 0.82215223f;
    p = p * t + 1.48851587f;
    p = p * t - 1.13520398f;
    p = p * t + 0.27886807f;
    p = p * t - 0.18628806f;
    p = p * t + 0.09678418f;
    p = p * t + 0.37409196f;
    p = p * t + 1.00002368f;
    p = p * t - 1.26551223f;
    const float c = t * exp_f(-a * a + p);  // erfc(|u|)
    return u >= 0.0f ? 0.5f * c : 1.0f - 0.5f * c;
  } else {
    return T(0.5) * (T(1) + std::erf(x * kInvSqrt2<T>));
  }
}

// C[M×N] (+)= A[M×K] · B[K×N], all row-major and densely packed. Register
// blocked over kRows×kCols output tiles; every C element is summed over k in
// ascending order by exactly one thread.
template <class T>
void gemm(T* __restrict c, const T* __restrict a, const T* __restrict b, std::size_t m,
          std::size_t n, std::size_t k, bool accumulate) {
  constexpr std::size_t kRows = 4;
  constexpr std::size_t kCols = 64 / sizeof(T) * 2;
  const std::size_t row_blocks = (m + kRows - 1) / kRows;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t bb = 0; bb < static_cast<std::ptrdiff_t>(row_blocks); ++bb) {
    const std::size_t i0 = static_cast<std::size_t>(bb) * kRows;
    const std::size_t rn = std::min(kRows, m - i0);
    for (std::size_t j0 = 0; j0 < n; j0 += kCols) {
      const std::size_t jn = std::min(kCols, n - j0);
      if (rn == kRows && jn == kCols) {
        T acc[kRows][kCols];
        for (std::size_t r = 0; r < kRows; ++r) {
          for (std::size_t j = 0; j < kCols; ++j) {
            acc[r][j] = accumulate ? c[(i0 + r) * n + j0 + j] : T(0);
          }
        }
        for (std::size_t kk = 0; kk < k; ++kk) {
          const T* __restrict brow = b + kk * n + j0;
          for (std::size_t r = 0; r < kRows; ++r) {
            const T av = a[(i0 + r) * k + kk];
#pragma omp simd
            for (std::size_t j = 0; j < kCols; ++j) acc[r][j] += av * brow[j];
          }
        }
        for (std::size_t r = 0; r < kRows; ++r) {
          for (std::size_t j = 0; j < kCols; ++j) c[(i0 + r) * n + j0 + j] = acc[r][j];
        }
      } else {
        for (std::size_t r = 0; r < rn; ++r) {
          T* __restrict crow = c + (i0 + r) * n + j0;
          T acc[kCols];
          for (std::size_t j = 0; j < jn; ++j) acc[j] = accumulate ? crow[j] : T(0);
          for (std::size_t kk = 0; kk < k; ++kk) {
            const T av = a[(i0 + r) * k + kk];
            const T* __restrict brow = b + kk * n + j0;
            for (std::size_t j = 0; j < jn; ++j) acc[j] += av * brow[j];
          }
          for (std::size_t j = 0; j < jn; ++j) crow[j] = acc[j];
        }
      }
    }
  }
}

template <class T>
std::vector<T> transpose(const T* src, std::size_t rows, std::size_t cols) {
  std::vector<T> t(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = src[i * cols + j];
  }
  return t;
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

template <class T>
void linear_forward(std::span<T> out, std::span<const T> in, std::span<const T> weight,
                    std::span<const T> bias, std::size_t rows, std::size_t in_dim,
                    std::size_t out_dim) {
  T* o = out.data();
  if (!bias.empty()) {
    for (std::size_t i = 0; i < rows; ++i) std::copy_n(bias.data(), out_dim, o + i * out_dim);
  }
  gemm(o, in.data(), weight.data(), rows, out_dim, in_dim, !bias.empty());
}

template <class T>
void linear_backward(std::span<T> d_in, std::span<T> d_weight, std::span<T> d_bias,
                     std::span<const T> d_out, std::span<const T> in, std::span<const T> weight,
                     std::size_t rows, std::size_t in_dim, std::size_t out_dim) {
  if (!d_in.empty()) {
    const auto wt = transpose(weight.data(), in_dim, out_dim);
    gemm(d_in.data(), d_out.data(), wt.data(), rows, in_dim, out_dim, true);
  }
  const auto xt = transpose(in.data(), rows, in_dim);
  gemm(d_weight.data(), xt.data(), d_out.data(), in_dim, out_dim, rows, true);
  if (!d_bias.empty()) {
    T* __restrict db = d_bias.data();
    const T* __restrict dy = d_out.data();
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < out_dim; ++j) db[j] += dy[i * out_dim + j];
    }
  }
}

template <class T>
void layernorm_forward(std::span<T> out, std::span<T> mean, std::span<T> rstd,
                       std::span<const T> in, std::span<const T> gamma, std::span<const T> beta,
                       std::size_t rows, std::size_t dim, T eps) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(rows); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const T* x = in.data() + i * dim;
    T m = 0;
    for (std::size_t j = 0; j < dim; ++j) m += x[j];
    m /= static_cast<T>(dim);
    T v = 0;
    for (std::size_t j = 0; j < dim; ++j) v += (x[j] - m) * (x[j] - m);
    v /= static_cast<T>(dim);
    const T r = T(1) / std::sqrt(v + eps);
    T* o = out.data() + i * dim;
    for (std::size_t j = 0; j < dim; ++j) o[j] = (x[j] - m) * r * gamma[j] + beta[j];
    mean[i] = m;
    rstd[i] = r;
  }
}

template <class T>
void layernorm_backward(std::span<T> d_in, std::span<T> d_gamma, std::span<T> d_beta,
                        std::span<const T> d_out, std::span<const T> in, std::span<const T> mean,
                        std::span<const T> rstd, std::span<const T> gamma, std::size_t rows,
                        std::size_t dim) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(rows); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const T* x = in.data() + i * dim;
    const T* dy = d_out.data() + i * dim;
    T* dx = d_in.data() + i * dim;
    const T m = mean[i];
    const T r = rstd[i];
    T sum_g = 0;
    T sum_gx = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      const T g = dy[j] * gamma[j];
      sum_g += g;
      sum_gx += g * (x[j] - m) * r;
    }
    sum_g /= static_cast<T>(dim);
    sum_gx /= static_cast<T>(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const T xhat = (x[j] - m) * r;
      dx[j] += r * (dy[j] * gamma[j] - sum_g - xhat * sum_gx);
    }
  }
  for (std::size_t i = 0; i < rows; ++i) {
    const T* x = in.data() + i * dim;
    const T* dy = d_out.data() + i * dim;
    const T m = mean[i];
    const T r = rstd[i];
    for (std::size_t j = 0; j < dim; ++j) {
      d_gamma[j] += dy[j] * (x[j] - m) * r;
      d_beta[j] += dy[j];
    }
  }
}

template <class T>
void gelu_forward(std::span<T> out, std::span<const T> in) {
  T* __restrict o = out.data();
  const T* __restrict x = in.data();
#pragma omp parallel
  {
    const auto [b, e] = thread_range(in.size());
#pragma omp simd
    for (std::size_t i = b; i < e; ++i) o[i] = x[i] * normal_cdf(x[i]);
  }
}

template <class T>
void gelu_backward(std::span<T> d_in, std::span<const T> d_out, std::span<const T> in) {
  T* __restrict dx = d_in.data();
  const T* __restrict dy = d_out.data();
  const T* __restrict x = in.data();
#pragma omp parallel
  {
    const auto [b, e] = thread_range(in.size());
#pragma omp simd
    for (std::size_t i = b; i < e; ++i) {
      const T pdf = kInvSqrt2Pi<T> * exp_t(T(-0.5) * x[i] * x[i]);
      dx[i] += dy[i] * (normal_cdf(x[i]) + x[i] * pdf);
    }
  }
}

template <class T>
void attention_forward(std::span<T> out, std::span<T> probs, std::span<const T> qkv,
                       const SeqLayout& layout, std::size_t dim) {
  const std::size_t heads = layout.heads;
  const std::size_t hd = dim / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  const std::size_t stride = 3 * dim;
  const auto work = static_cast<std::ptrdiff_t>(layout.sequences() * heads);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t w = 0; w < work; ++w) {
    const std::size_t n = static_cast<std::size_t>(w) / heads;
    const std::size_t h = static_cast<std::size_t>(w) % heads;
    const std::size_t t0 = layout.token_offsets[n];
    const std::size_t len = layout.length(n);
    T* p = probs.data() + layout.prob_offsets[n] + h * len * len;
    for (std::size_t i = 0; i < len; ++i) {
      const T* q = qkv.data() + (t0 + i) * stride + h * hd;
      T* prow = p + i * len;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < len; ++j) {
        const T* k = qkv.data() + (t0 + j) * stride + dim + h * hd;
        T s = 0;
        for (std::size_t d = 0; d < hd; ++d) s += q[d] * k[d];
        prow[j] = s * scale;
        mx = std::max(mx, prow[j]);
      }
      T sum = 0;
      for (std::size_t j = 0; j < len; ++j) {
        prow[j] = exp_t(prow[j] - mx);
        sum += prow[j];
      }
      const T inv = T(1) / sum;
      for (std::size_t j = 0; j < len; ++j) prow[j] *= inv;
      T* o = out.data() + (t0 + i) * dim + h * hd;
      for (std::size_t d = 0; d < hd; ++d) o[d] = 0;
      for (std::size_t j = 0; j < len; ++j) {
        const T* v = qkv.data() + (t0 + j) * stride + 2 * dim + h * hd;
        const T a = prow[j];
        for (std::size_t d = 0; d < hd; ++d) o[d] += a * v[d];
      }
    }
  }
}

template <class T>
void attention_backward(std::span<T> d_qkv, std::span<const T> d_out, std::span<const T> qkv,
                        std::span<const T> probs, const SeqLayout& layout, std::size_t dim) {
  const std::size_t heads = layout.heads;
  const std::size_t hd = dim / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  const std::size_t stride = 3 * dim;
  const auto work = static_cast<std::ptrdiff_t>(layout.sequences() * heads);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t w = 0; w < work; ++w) {
    const std::size_t n = static_cast<std::size_t>(w) / heads;
    const std::size_t h = static_cast<std::size_t>(w) % heads;
    const std::size_t t0 = layout.token_offsets[n];
    const std::size_t len = layout.length(n);
    const T* p = probs.data() + layout.prob_offsets[n] + h * len * len;
    std::vector<T> ds(len);
    for (std::size_t i = 0; i < len; ++i) {
      const T* dout = d_out.data() + (t0 + i) * dim + h * hd;
      const T* prow = p + i * len;
      T dot = 0;
      for (std::size_t j = 0; j < len; ++j) {
        const T* v = qkv.data() + (t0 + j) * stride + 2 * dim + h * hd;
        T* dv = d_qkv.data() + (t0 + j) * stride + 2 * dim + h * hd;
        T dp = 0;
        for (std::size_t d = 0; d < hd; ++d) {
          dp += dout[d] * v[d];
          dv[d] += prow[j] * dout[d];
        }
        ds[j] = dp;
        dot += prow[j] * dp;
      }
      const T* q = qkv.data() + (t0 + i) * stride + h * hd;
      T* dq = d_qkv.data() + (t0 + i) * stride + h * hd;
      for (std::size_t j = 0; j < len; ++j) {
        const T g = prow[j] * (ds[j] - dot) * scale;
        const T* k = qkv.data() + (t0 + j) * stride + dim + h * hd;
        T* dk = d_qkv.data() + (t0 + j) * stride + dim + h * hd;
        for (std::size_t d = 0; d < hd; ++d) {
          dq[d] += g * k[d];
          dk[d] += g * q[d];
        }
      }
    }
  }
}

#include "kernel_instantiations.inc"

}  // namespace cacti::kernels
