// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense transformer kernels, row-major. Two implementations share every
// signature:
//
//   cacti::kernels             OpenMP-parallel, cache-ordered loops; used by
//                              the model.
//   cacti::kernels::reference  plain serial loops; kept as the test oracle
//                              for the parallel versions and as the benchmark
//                              baseline.
//
// Parallel kernels partition work by output element, so every output is
// produced by one thread in a fixed order and results do not depend on the
// thread count.
//
// Backward kernels accumulate (+=) into their gradient outputs.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cacti::kernels {

/// Token layout for attention over a ragged batch: sequence n owns tokens
/// [token_offsets[n], token_offsets[n+1]) and attention probabilities
/// [prob_offsets[n], prob_offsets[n+1]) laid out as [head][query][key].
struct SeqLayout {
  std::vector<std::size_t> token_offsets{0};
  std::vector<std::size_t> prob_offsets{0};
  std::size_t heads = 1;

  void add_sequence(std::size_t length) {
    token_offsets.push_back(token_offsets.back() + length);
    prob_offsets.push_back(prob_offsets.back() + heads * length * length);
  }
  std::size_t sequences() const noexcept { return token_offsets.size() - 1; }
  std::size_t tokens() const noexcept { return token_offsets.back(); }
  std::size_t prob_size() const noexcept { return prob_offsets.back(); }
  std::size_t length(std::size_t n) const { return token_offsets[n + 1] - token_offsets[n]; }
};

inline SeqLayout make_layout(std::size_t heads) {
  SeqLayout l;
  l.heads = heads;
  return l;
}

#define CACTI_KERNEL_DECLS                                                                     \
  /* out[rows×out_dim] = in[rows×in_dim] · weight[in_dim×out_dim] + bias */                   \
  template <class T>                                                                           \
  void linear_forward(std::span<T> out, std::span<const T> in, std::span<const T> weight,      \
                      std::span<const T> bias, std::size_t rows, std::size_t in_dim,           \
                      std::size_t out_dim);                                                    \
  /* d_in may be empty when the input gradient is not needed. */                              \
  template <class T>                                                                           \
  void linear_backward(std::span<T> d_in, std::span<T> d_weight, std::span<T> d_bias,          \
                       std::span<const T> d_out, std::span<const T> in,                        \
                       std::span<const T> weight, std::size_t rows, std::size_t in_dim,        \
                       std::size_t out_dim);                                                   \
  template <class T>                                                                           \
  void layernorm_forward(std::span<T> out, std::span<T> mean, std::span<T> rstd,               \
                         std::span<const T> in, std::span<const T> gamma,                      \
                         std::span<const T> beta, std::size_t rows, std::size_t dim, T eps);   \
  template <class T>                                                                           \
  void layernorm_backward(std::span<T> d_in, std::span<T> d_gamma, std::span<T> d_beta,        \
                          std::span<const T> d_out, std::span<const T> in,                     \
                          std::span<const T> mean, std::span<const T> rstd,                    \
                          std::span<const T> gamma, std::size_t rows, std::size_t dim);        \
  /* Exact (erf) GELU. */                                                                      \
  template <class T>                                                                           \
  void gelu_forward(std::span<T> out, std::span<const T> in);                                  \
  template <class T>                                                                           \
  void gelu_backward(std::span<T> d_in, std::span<const T> d_out, std::span<const T> in);      \
  /* qkv rows are [q | k | v], each `dim` wide; heads split dim evenly. */                     \
  template <class T>                                                                           \
  void attention_forward(std::span<T> out, std::span<T> probs, std::span<const T> qkv,         \
                         const SeqLayout& layout, std::size_t dim);                            \
  template <class T>                                                                           \
  void attention_backward(std::span<T> d_qkv, std::span<const T> d_out,                        \
                          std::span<const T> qkv, std::span<const T> probs,                    \
                          const SeqLayout& layout, std::size_t dim);

CACTI_KERNEL_DECLS

namespace reference {
CACTI_KERNEL_DECLS
}  // namespace reference

#undef CACTI_KERNEL_DECLS

/// Number of OpenMP threads the parallel kernels will use.
int max_threads();
void set_threads(int n);

}  // namespace cacti::kernels
