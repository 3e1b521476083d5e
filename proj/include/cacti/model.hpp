// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Context-aware masked-autoencoder backbone.
//
// Encoder tokens are value embeddings of the visible features concatenated
// with a projection of each column's context vector, plus a fixed sin-cos
// positional row for the column. The decoder rebuilds all K slots in column
// order, substituting a learned [MASK] vector for features the encoder did
// not see, re-projects them, appends decoder-side context and position, and
// maps every slot to a scalar through a 2-layer head.
//
// Everything is templated on the scalar type: float for training and
// inference, double for gradient checks.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cacti/kernels.hpp"
#include "cacti/masking.hpp"
#include "cacti/matrix.hpp"
#include "cacti/rng.hpp"

namespace cacti {

struct ModelConfig {
  std::size_t features = 0;        // K
  std::size_t embed_dim = 64;      // E
  double ctx_fraction = 0.25;      // C / E when context is present
  std::size_t enc_depth = 10;
  std::size_t dec_depth = 4;
  std::size_t heads = 8;
  std::size_t mlp_ratio = 4;
  std::size_t ctx_raw_dim = 0;     // 0 selects the context-free (CMAE) model

  /// Width of the context block C; 0 without context.
  std::size_t ctx_dim() const;
  /// Width of the value block U = E − C.
  std::size_t value_dim() const { return embed_dim - ctx_dim(); }
  std::size_t hidden_dim() const { return embed_dim * mlp_ratio; }
  bool has_context() const { return ctx_raw_dim > 0; }
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

enum class LossMode { kBoth, kObserved, kMasked };

std::string_view to_string(LossMode mode);
LossMode parse_loss_mode(std::string_view text);

struct TensorSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  /// Receives decoupled weight decay (everything but biases and [MASK]).
  bool decay = false;

  std::size_t size() const noexcept { return rows * cols; }
};

/// Fixed ordering of all learnable tensors in one flat buffer. The order is
/// the checkpoint order.
class ParamLayout {
 public:
  struct Block {
    std::size_t ln1_g, ln1_b, qkv_w, qkv_b, proj_w, proj_b;
    std::size_t ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;
  };

  explicit ParamLayout(const ModelConfig& config);

  const std::vector<TensorSpec>& tensors() const noexcept { return tensors_; }
  const TensorSpec& operator[](std::size_t i) const { return tensors_[i]; }
  std::size_t total() const noexcept { return total_; }

  std::size_t val_enc_w = 0, val_enc_b = 0;
  std::size_t ctx_enc_w = 0, ctx_enc_b = 0;
  std::size_t val_dec_w = 0, val_dec_b = 0;
  std::size_t ctx_dec_w = 0, ctx_dec_b = 0;
  std::size_t mask_token = 0;
  std::vector<Block> enc;
  std::vector<Block> dec;
  std::size_t head_w1 = 0, head_b1 = 0, head_w2 = 0, head_b2 = 0;

 private:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols, bool decay);
  Block add_block(const std::string& prefix, std::size_t e, std::size_t h);

  std::vector<TensorSpec> tensors_;
  std::size_t total_ = 0;
};

/// P[k, 2i] = sin(k / 10000^(2i/E)), P[k, 2i+1] = cos(k / 10000^(2i/E)).
Matrix<double> positional_table(std::size_t features, std::size_t embed_dim);

template <class T>
struct ModelParams {
  ModelConfig config;
  ParamLayout layout;
  std::vector<T> values;
  /// Fixed positional table; not part of `values`, never optimized.
  Matrix<T> pos_table;

  explicit ModelParams(const ModelConfig& cfg);

  std::span<T> tensor(std::size_t i) {
    return {values.data() + layout[i].offset, layout[i].size()};
  }
  std::span<const T> tensor(std::size_t i) const {
    return {values.data() + layout[i].offset, layout[i].size()};
  }
};

/// Affine weights and [MASK] from a normal truncated at ±2σ; biases 0;
/// layer-norm gains 1.
template <class T>
ModelParams<T> init_params(const ModelConfig& config, Rng& rng, double stddev = 0.02);

template <class To, class From>
ModelParams<To> cast_params(const ModelParams<From>& params);

/// One batch worth of model input.
///
/// Encoder token t belongs to the sample whose range in `enc_offsets`
/// contains it and embeds column enc_columns[t], or is a null pad when that
/// is −1. dec_source[n·K + k] names the encoder token carrying column k of
/// sample n, or −1 for a [MASK] slot.
struct BatchInputs {
  std::size_t samples = 0;
  std::size_t features = 0;
  std::vector<double> values;          // B×K scaled, missing cells hold 0
  std::vector<std::ptrdiff_t> enc_columns;
  std::vector<std::size_t> enc_offsets{0};
  std::vector<std::ptrdiff_t> dec_source;
  std::vector<double> loss_weight;     // B×K, empty at inference
};

/// Training inputs from a masked batch. `scaled` holds the batch rows
/// (B×K, NaN at missing cells). Per sample, each term of the loss is the mean
/// squared error over its set, averaged over the batch.
BatchInputs make_training_inputs(const MaskedBatch& batch, const Matrix<double>& scaled,
                                 LossMode mode);

/// Inference inputs: each sample's encoder sees exactly its observed
/// features in column order, with no padding.
BatchInputs make_inference_inputs(const Matrix<double>& scaled, const Mask& observed);

template <class T>
struct BlockCache {
  std::vector<T> ln1, mean1, rstd1, qkv, att, probs, y, ln2, mean2, rstd2, fc1, act;
};

template <class T>
struct StackCache {
  kernels::SeqLayout layout;
  std::vector<std::vector<T>> residual;  // depth + 1 states, tokens×E
  std::vector<BlockCache<T>> blocks;
};

template <class T>
struct ForwardCache {
  std::vector<T> ctx_enc, ctx_dec;        // K×C
  StackCache<T> enc, dec;
  std::vector<T> dec_slots;               // B·K×E
  std::vector<T> dec_values;              // B·K×U
  std::vector<T> head_hidden, head_act;   // B·K×H
  std::vector<T> output;                  // B×K
};

/// `ctx` is the K×ctx_raw_dim context matrix, or null for context-free models.
template <class T>
void forward(const ModelParams<T>& params, const Matrix<T>* ctx, const BatchInputs& inputs,
             ForwardCache<T>& cache);

/// Σ w·(x̄ − x̃)² over the batch, using cache.output from `forward`.
template <class T>
double batch_loss(const BatchInputs& inputs, const ForwardCache<T>& cache);

/// Backpropagates d(loss)/d(output) into `grads` (accumulating, same layout
/// as params.values).
template <class T>
void backward(const ModelParams<T>& params, const Matrix<T>* ctx, const BatchInputs& inputs,
              ForwardCache<T>& cache, std::span<const T> d_output, std::span<T> grads);

/// Forward + loss + backward. `grads` is overwritten.
template <class T>
double loss_and_gradients(const ModelParams<T>& params, const Matrix<T>* ctx,
                          const BatchInputs& inputs, ForwardCache<T>& cache,
                          std::vector<T>& grads);

// Stage-level entry points, used by tests and tools.

/// K×E encoder embedding of one sample; NaN cells use the protected value 0.
template <class T>
Matrix<T> embed_sample(const ModelParams<T>& params, std::span<const double> x,
                       const Matrix<T>* ctx);

/// Runs the encoder stack over one sequence of tokens (L×E).
template <class T>
Matrix<T> encode(const ModelParams<T>& params, const Matrix<T>& tokens);

/// Decoder + head for a batch, given encoder latents (one row per encoder
/// token of `inputs`). Returns B×K scaled-space outputs.
template <class T>
Matrix<T> decode_batch(const ModelParams<T>& params, const Matrix<T>& latents,
                       const BatchInputs& inputs, const Matrix<T>* ctx);

template <class T>
Matrix<T> context_matrix(const Matrix<double>& ctx);

}  // namespace cacti
