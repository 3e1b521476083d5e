// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial reference kernels: textbook loop order, no threading. Kept as the
// oracle for the parallel kernels.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cacti/kernels.hpp"

namespace cacti::kernels::reference {

template <class T>
void linear_forward(std::span<T> out, std::span<const T> in, std::span<const T> weight,
                    std::span<const T> bias, std::size_t rows, std::size_t in_dim,
                    std::size_t out_dim) {
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < out_dim; ++j) {
      T s = bias.empty() ? T(0) : bias[j];
      for (std::size_t k = 0; k < in_dim; ++k) s += in[i * in_dim + k] * weight[k * out_dim + j];
      out[i * out_dim + j] = s;
    }
  }
}

template <class T>
void linear_backward(std::span<T> d_in, std::span<T> d_weight, std::span<T> d_bias,
                     std::span<const T> d_out, std::span<const T> in, std::span<const T> weight,
                     std::size_t rows, std::size_t in_dim, std::size_t out_dim) {
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < out_dim; ++j) {
      const T g = d_out[i * out_dim + j];
      for (std::size_t k = 0; k < in_dim; ++k) {
        if (!d_in.empty()) d_in[i * in_dim + k] += g * weight[k * out_dim + j];
        d_weight[k * out_dim + j] += in[i * in_dim + k] * g;
      }
      if (!d_bias.empty()) d_bias[j] += g;
    }
  }
}

template <class T>
void layernorm_forward(std::span<T> out, std::span<T> mean, std::span<T> rstd,
                       std::span<const T> in, std::span<const T> gamma, std::span<const T> beta,
                       std::size_t rows, std::size_t dim, T eps) {
  for (std::size_t i = 0; i < rows; ++i) {
    T m = 0;
    for (std::size_t j = 0; j < dim; ++j) m += in[i * dim + j];
    m /= static_cast<T>(dim);
    T v = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      const T d = in[i * dim + j] - m;
      v += d * d;
    }
    v /= static_cast<T>(dim);
    const T r = T(1) / std::sqrt(v + eps);
    for (std::size_t j = 0; j < dim; ++j) {
      out[i * dim + j] = (in[i * dim + j] - m) * r * gamma[j] + beta[j];
    }
    mean[i] = m;
    rstd[i] = r;
  }
}

template <class T>
void layernorm_backward(std::span<T> d_in, std::span<T> d_gamma, std::span<T> d_beta,
                        std::span<const T> d_out, std::span<const T> in, std::span<const T> mean,
                        std::span<const T> rstd, std::span<const T> gamma, std::size_t rows,
                        std::size_t dim) {
  // dL/dx_j = r/D · (D·g_j − Σg − x̂_j·Σ g·x̂), g = dy ⊙ γ
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<T> xhat(dim);
    std::vector<T> g(dim);
    T sum_g = 0;
    T sum_gx = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      xhat[j] = (in[i * dim + j] - mean[i]) * rstd[i];
      g[j] = d_out[i * dim + j] * gamma[j];
      sum_g += g[j];
      sum_gx += g[j] * xhat[j];
      d_gamma[j] += d_out[i * dim + j] * xhat[j];
      d_beta[j] += d_out[i * dim + j];
    }
    const T inv_d = T(1) / static_cast<T>(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      d_in[i * dim + j] += rstd[i] * (g[j] - sum_g * inv_d - xhat[j] * sum_gx * inv_d);
    }
  }
}

template <class T>
void gelu_forward(std::span<T> out, std::span<const T> in) {
  for (std::size_t i = 0; i < in.size(); ++i) {
    const T x = in[i];
    out[i] = x * T(0.5) * std::erfc(-x / std::sqrt(T(2)));
  }
}

template <class T>
void gelu_backward(std::span<T> d_in, std::span<const T> d_out, std::span<const T> in) {
  const T pi = T(3.14159265358979323846);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const T x = in[i];
    const T cdf = T(0.5) * std::erfc(-x / std::sqrt(T(2)));
    const T pdf = std::exp(-x * x / T(2)) / std::sqrt(T(2) * pi);
    d_in[i] += d_out[i] * (cdf + x * pdf);
  }
}

template <class T>
void attention_forward(std::span<T> out, std::span<T> probs, std::span<const T> qkv,
                       const SeqLayout& layout, std::size_t dim) {
  const std::size_t hd = dim / layout.heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  for (std::size_t n = 0; n < layout.sequences(); ++n) {
    const std::size_t t0 = layout.token_offsets[n];
    const std::size_t len = layout.length(n);
    for (std::size_t h = 0; h < layout.heads; ++h) {
      auto q = [&](std::size_t i, std::size_t d) { return qkv[(t0 + i) * 3 * dim + h * hd + d]; };
      auto k = [&](std::size_t i, std::size_t d) {
        return qkv[(t0 + i) * 3 * dim + dim + h * hd + d];
      };
      auto v = [&](std::size_t i, std::size_t d) {
        return qkv[(t0 + i) * 3 * dim + 2 * dim + h * hd + d];
      };
      for (std::size_t i = 0; i < len; ++i) {
        std::vector<T> s(len);
        for (std::size_t j = 0; j < len; ++j) {
          T dot = 0;
          for (std::size_t d = 0; d < hd; ++d) dot += q(i, d) * k(j, d);
          s[j] = dot * scale;
        }
        const T mx = *std::max_element(s.begin(), s.end());
        T z = 0;
        for (auto& x : s) {
          x = std::exp(x - mx);
          z += x;
        }
        for (std::size_t j = 0; j < len; ++j) {
          probs[layout.prob_offsets[n] + (h * len + i) * len + j] = s[j] / z;
        }
        for (std::size_t d = 0; d < hd; ++d) {
          T acc = 0;
          for (std::size_t j = 0; j < len; ++j) acc += s[j] / z * v(j, d);
          out[(t0 + i) * dim + h * hd + d] = acc;
        }
      }
    }
  }
}

template <class T>
void attention_backward(std::span<T> d_qkv, std::span<const T> d_out, std::span<const T> qkv,
                        std::span<const T> probs, const SeqLayout& layout, std::size_t dim) {
  const std::size_t hd = dim / layout.heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  for (std::size_t n = 0; n < layout.sequences(); ++n) {
    const std::size_t t0 = layout.token_offsets[n];
    const std::size_t len = layout.length(n);
    for (std::size_t h = 0; h < layout.heads; ++h) {
      auto at = [&](std::size_t tok, std::size_t part, std::size_t d) {
        return (t0 + tok) * 3 * dim + part * dim + h * hd + d;
      };
      auto p = [&](std::size_t i, std::size_t j) {
        return probs[layout.prob_offsets[n] + (h * len + i) * len + j];
      };
      for (std::size_t i = 0; i < len; ++i) {
        // dP_ij = dO_i · V_j ; dS_ij = P_ij (dP_ij − Σ_l P_il dP_il)
        std::vector<T> dp(len);
        for (std::size_t j = 0; j < len; ++j) {
          T s = 0;
          for (std::size_t d = 0; d < hd; ++d) s += d_out[(t0 + i) * dim + h * hd + d] * qkv[at(j, 2, d)];
          dp[j] = s;
        }
        T row = 0;
        for (std::size_t j = 0; j < len; ++j) row += p(i, j) * dp[j];
        for (std::size_t j = 0; j < len; ++j) {
          const T ds = p(i, j) * (dp[j] - row);
          for (std::size_t d = 0; d < hd; ++d) {
            d_qkv[at(i, 0, d)] += ds * qkv[at(j, 1, d)] * scale;
            d_qkv[at(j, 1, d)] += ds * qkv[at(i, 0, d)] * scale;
            d_qkv[at(j, 2, d)] += p(i, j) * d_out[(t0 + i) * dim + h * hd + d];
          }
        }
      }
    }
  }
}

#include "kernel_instantiations.inc"

}  // namespace cacti::kernels::reference
