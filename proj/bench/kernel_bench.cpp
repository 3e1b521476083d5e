// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial reference kernels against the OpenMP ones, on training-sized
// shapes (1024 tokens, E=32, MLP width 128, 128 sequences of 8 tokens).
// Set OMP_NUM_THREADS or CACTI_THREADS to vary the parallel side.

#include <benchmark/benchmark.h>

#include <vector>

#include "cacti/kernels.hpp"
#include "cacti/rng.hpp"

namespace {

namespace k = cacti::kernels;
namespace ref = cacti::kernels::reference;

constexpr std::size_t kRows = 1024;
constexpr std::size_t kEmbed = 32;
constexpr std::size_t kHidden = 128;

std::vector<float> randn(std::size_t n, float scale = 1.0f) {
  static cacti::Rng rng(7);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal()) * scale;
  return v;
}

template <bool Ref>
void BM_LinearForward(benchmark::State& state) {
  const auto in_dim = static_cast<std::size_t>(state.range(0));
  const auto out_dim = static_cast<std::size_t>(state.range(1));
  const auto x = randn(kRows * in_dim), w = randn(in_dim * out_dim, 0.1f), b = randn(out_dim);
  std::vector<float> out(kRows * out_dim);
  for (auto _ : state) {
    if constexpr (Ref) {
      ref::linear_forward<float>(out, x, w, b, kRows, in_dim, out_dim);
    } else {
      k::linear_forward<float>(out, x, w, b, kRows, in_dim, out_dim);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(kRows * in_dim * out_dim));
}

template <bool Ref>
void BM_LinearBackward(benchmark::State& state) {
  const auto in_dim = static_cast<std::size_t>(state.range(0));
  const auto out_dim = static_cast<std::size_t>(state.range(1));
  const auto x = randn(kRows * in_dim), w = randn(in_dim * out_dim, 0.1f);
  const auto dout = randn(kRows * out_dim);
  std::vector<float> dx(kRows * in_dim), dw(in_dim * out_dim), db(out_dim);
  for (auto _ : state) {
    if constexpr (Ref) {
      ref::linear_backward<float>(dx, dw, db, dout, x, w, kRows, in_dim, out_dim);
    } else {
      k::linear_backward<float>(dx, dw, db, dout, x, w, kRows, in_dim, out_dim);
    }
    benchmark::DoNotOptimize(dw.data());
  }
}

template <bool Ref>
void BM_Gelu(benchmark::State& state) {
  const auto x = randn(kRows * kHidden);
  std::vector<float> out(x.size());
  for (auto _ : state) {
    if constexpr (Ref) {
      ref::gelu_forward<float>(out, x);
    } else {
      k::gelu_forward<float>(out, x);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Ref>
void BM_LayerNorm(benchmark::State& state) {
  const auto x = randn(kRows * kEmbed);
  const std::vector<float> gamma(kEmbed, 1.0f), beta(kEmbed, 0.0f);
  std::vector<float> out(x.size()), mean(kRows), rstd(kRows);
  for (auto _ : state) {
    if constexpr (Ref) {
      ref::layernorm_forward<float>(out, mean, rstd, x, gamma, beta, kRows, kEmbed, 1e-6f);
    } else {
      k::layernorm_forward<float>(out, mean, rstd, x, gamma, beta, kRows, kEmbed, 1e-6f);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Ref>
void BM_Attention(benchmark::State& state) {
  auto layout = k::make_layout(8);
  for (std::size_t n = 0; n < kRows / 8; ++n) layout.add_sequence(8);
  const auto qkv = randn(kRows * 3 * kEmbed);
  std::vector<float> out(kRows * kEmbed), probs(layout.prob_size());
  for (auto _ : state) {
    if constexpr (Ref) {
      ref::attention_forward<float>(out, probs, qkv, layout, kEmbed);
    } else {
      k::attention_forward<float>(out, probs, qkv, layout, kEmbed);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

#define CACTI_PAIR(fn) \
  BENCHMARK_TEMPLATE(fn, true)->Name(#fn "/reference"); \
  BENCHMARK_TEMPLATE(fn, false)->Name(#fn "/openmp")

#define CACTI_LINEAR_PAIR(fn)                                                                \
  BENCHMARK_TEMPLATE(fn, true)                                                               \
      ->Name(#fn "/reference")                                                               \
      ->Args({kEmbed, 3 * kEmbed})                                                           \
      ->Args({kEmbed, kHidden})                                                              \
      ->Args({kHidden, kEmbed});                                                             \
  BENCHMARK_TEMPLATE(fn, false)                                                              \
      ->Name(#fn "/openmp")                                                                  \
      ->Args({kEmbed, 3 * kEmbed})                                                           \
      ->Args({kEmbed, kHidden})                                                              \
      ->Args({kHidden, kEmbed})

CACTI_LINEAR_PAIR(BM_LinearForward);
CACTI_LINEAR_PAIR(BM_LinearBackward);
CACTI_PAIR(BM_Gelu);
CACTI_PAIR(BM_LayerNorm);
CACTI_PAIR(BM_Attention);

}  // namespace

BENCHMARK_MAIN();
