// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Plain scalar re-implementation of the transformer pieces, written for
// readability rather than speed. Used only as a test oracle.

#pragma once

#include <cmath>
#include <vector>

#include "cacti/model.hpp"

namespace cacti::oracle {

using Mat = std::vector<std::vector<double>>;

inline std::vector<double> tensor(const ModelParams<double>& p, std::size_t i) {
  const auto t = p.tensor(i);
  return {t.begin(), t.end()};
}

// x · W + b with W stored in×out row-major.
inline Mat affine(const Mat& x, const std::vector<double>& w, const std::vector<double>& b,
                  std::size_t out) {
  Mat y(x.size(), std::vector<double>(out));
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < x[r].size(); ++i) s += x[r][i] * w[i * out + o];
      y[r][o] = s;
    }
  }
  return y;
}

inline Mat layer_norm(const Mat& x, const std::vector<double>& g, const std::vector<double>& b) {
  Mat y = x;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double n = static_cast<double>(x[r].size());
    double mu = 0;
    for (double v : x[r]) mu += v;
    mu /= n;
    double var = 0;
    for (double v : x[r]) var += (v - mu) * (v - mu);
    var /= n;
    for (std::size_t i = 0; i < x[r].size(); ++i) {
      y[r][i] = (x[r][i] - mu) / std::sqrt(var + 1e-6) * g[i] + b[i];
    }
  }
  return y;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline Mat gelu(Mat x) {
  for (auto& row : x) {
    for (auto& v : row) v = gelu(v);
  }
  return x;
}

inline Mat attention(const Mat& qkv, std::size_t e, std::size_t heads) {
  const std::size_t n = qkv.size();
  const std::size_t hd = e / heads;
  Mat out(n, std::vector<double>(e, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> s(n);
      double mx = -1e300;
      for (std::size_t j = 0; j < n; ++j) {
        double d = 0;
        for (std::size_t c = 0; c < hd; ++c) d += qkv[i][h * hd + c] * qkv[j][e + h * hd + c];
        s[j] = d / std::sqrt(static_cast<double>(hd));
        mx = std::max(mx, s[j]);
      }
      double z = 0;
      for (auto& v : s) z += (v = std::exp(v - mx));
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t c = 0; c < hd; ++c) out[i][h * hd + c] += s[j] / z * qkv[j][2 * e + h * hd + c];
      }
    }
  }
  return out;
}

inline Mat block(const ModelParams<double>& p, const ParamLayout::Block& b, const Mat& x) {
  const std::size_t e = p.config.embed_dim;
  const std::size_t h = p.config.hidden_dim();
  const Mat a = affine(
      attention(affine(layer_norm(x, tensor(p, b.ln1_g), tensor(p, b.ln1_b)), tensor(p, b.qkv_w),
                       tensor(p, b.qkv_b), 3 * e),
                e, p.config.heads),
      tensor(p, b.proj_w), tensor(p, b.proj_b), e);
  Mat y = x;
  for (std::size_t r = 0; r < y.size(); ++r) {
    for (std::size_t c = 0; c < e; ++c) y[r][c] += a[r][c];
  }
  const Mat f = affine(gelu(affine(layer_norm(y, tensor(p, b.ln2_g), tensor(p, b.ln2_b)),
                                   tensor(p, b.fc1_w), tensor(p, b.fc1_b), h)),
                       tensor(p, b.fc2_w), tensor(p, b.fc2_b), e);
  for (std::size_t r = 0; r < y.size(); ++r) {
    for (std::size_t c = 0; c < e; ++c) y[r][c] += f[r][c];
  }
  return y;
}

inline double pos(std::size_t k, std::size_t j, std::size_t e) {
  const double f = std::pow(10000.0, static_cast<double>(j - j % 2) / static_cast<double>(e));
  return j % 2 == 0 ? std::sin(static_cast<double>(k) / f) : std::cos(static_cast<double>(k) / f);
}

// Decoder and head for one sample. `slots[k]` is the encoder latent carrying
// column k, or empty for a masked slot. `ctx` holds one raw vector per column
// (ignored without context).
inline std::vector<double> decode_sample(const ModelParams<double>& p,
                                         const std::vector<std::vector<double>>& slots,
                                         const Mat& ctx) {
  const auto& cfg = p.config;
  const auto& L = p.layout;
  const std::size_t k = cfg.features;
  const std::size_t e = cfg.embed_dim;
  const std::size_t u = cfg.value_dim();
  const std::size_t cd = cfg.ctx_dim();
  Mat in(k);
  for (std::size_t c = 0; c < k; ++c) in[c] = slots[c].empty() ? tensor(p, L.mask_token) : slots[c];
  const Mat v = affine(in, tensor(p, L.val_dec_w), tensor(p, L.val_dec_b), u);
  Mat cproj;
  if (cd > 0) cproj = affine(ctx, tensor(p, L.ctx_dec_w), tensor(p, L.ctx_dec_b), cd);
  Mat z(k, std::vector<double>(e));
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < e; ++j) {
      z[c][j] = (j < u ? v[c][j] : cproj[c][j - u]) + pos(c, j, e);
    }
  }
  for (const auto& b : L.dec) z = block(p, b, z);
  const Mat hid = gelu(affine(z, tensor(p, L.head_w1), tensor(p, L.head_b1), cfg.hidden_dim()));
  const Mat out = affine(hid, tensor(p, L.head_w2), tensor(p, L.head_b2), 1);
  std::vector<double> y(k);
  for (std::size_t c = 0; c < k; ++c) y[c] = out[c][0];
  return y;
}

}  // namespace cacti::oracle
