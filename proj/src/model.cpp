// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include "cacti/model.hpp"

#include <algorithm>
#include <cmath>

#include "cacti/error.hpp"

namespace cacti {
namespace {

constexpr double kLayerNormEps = 1e-6;

template <class T>
std::span<const T> cview(const std::vector<T>& v) {
  return {v.data(), v.size()};
}

template <class T>
void zero(std::vector<T>& v, std::size_t n) {
  v.assign(n, T(0));
}

template <class T>
void check_finite(std::span<const T> values, const std::string& where) {
  for (T v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::kNumeric, "non-finite activation in " + where);
  }
}

template <class T>
void stack_forward(const ModelParams<T>& p, const std::vector<ParamLayout::Block>& blocks,
                   StackCache<T>& c, const char* stack_name) {
  const std::size_t e = p.config.embed_dim;
  const std::size_t h = p.config.hidden_dim();
  const std::size_t n = c.layout.tokens();
  const T eps = static_cast<T>(kLayerNormEps);
  c.residual.resize(blocks.size() + 1);
  c.blocks.resize(blocks.size());
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& b = blocks[l];
    auto& bc = c.blocks[l];
    const auto& x = c.residual[l];
    auto& out = c.residual[l + 1];
    bc.ln1.resize(n * e);
    bc.mean1.resize(n);
    bc.rstd1.resize(n);
    kernels::layernorm_forward<T>(bc.ln1, bc.mean1, bc.rstd1, cview(x), p.tensor(b.ln1_g),
                                  p.tensor(b.ln1_b), n, e, eps);
    bc.qkv.resize(n * 3 * e);
    kernels::linear_forward<T>(bc.qkv, cview(bc.ln1), p.tensor(b.qkv_w), p.tensor(b.qkv_b), n, e,
                               3 * e);
    bc.att.resize(n * e);
    bc.probs.resize(c.layout.prob_size());
    kernels::attention_forward<T>(bc.att, bc.probs, cview(bc.qkv), c.layout, e);
    bc.y.resize(n * e);
    kernels::linear_forward<T>(bc.y, cview(bc.att), p.tensor(b.proj_w), p.tensor(b.proj_b), n, e,
                               e);
    for (std::size_t i = 0; i < n * e; ++i) bc.y[i] += x[i];
    bc.ln2.resize(n * e);
    bc.mean2.resize(n);
    bc.rstd2.resize(n);
    kernels::layernorm_forward<T>(bc.ln2, bc.mean2, bc.rstd2, cview(bc.y), p.tensor(b.ln2_g),
                                  p.tensor(b.ln2_b), n, e, eps);
    bc.fc1.resize(n * h);
    kernels::linear_forward<T>(bc.fc1, cview(bc.ln2), p.tensor(b.fc1_w), p.tensor(b.fc1_b), n, e,
                               h);
    bc.act.resize(n * h);
    kernels::gelu_forward<T>(bc.act, cview(bc.fc1));
    out.resize(n * e);
    kernels::linear_forward<T>(out, cview(bc.act), p.tensor(b.fc2_w), p.tensor(b.fc2_b), n, h, e);
    for (std::size_t i = 0; i < n * e; ++i) out[i] += bc.y[i];
    check_finite<T>(cview(out), std::string(stack_name) + " block " + std::to_string(l));
  }
}

// d_top: gradient w.r.t. the last residual state; returns gradient w.r.t. the
// stack input in the same buffer.
template <class T>
void stack_backward(const ModelParams<T>& p, const std::vector<ParamLayout::Block>& blocks,
                    const StackCache<T>& c, std::vector<T>& d, std::span<T> grads) {
  const std::size_t e = p.config.embed_dim;
  const std::size_t h = p.config.hidden_dim();
  const std::size_t n = c.layout.tokens();
  const auto& lay = p.layout;
  auto g = [&](std::size_t idx) { return grads.subspan(lay[idx].offset, lay[idx].size()); };
  std::vector<T> d_act, d_fc1, d_ln2, d_att, d_qkv, d_ln1;
  for (std::size_t l = blocks.size(); l-- > 0;) {
    const auto& b = blocks[l];
    const auto& bc = c.blocks[l];
    // out = y + fc2(gelu(fc1(ln2(y))))
    std::vector<T> d_y = d;
    zero(d_act, n * h);
    kernels::linear_backward<T>(d_act, g(b.fc2_w), g(b.fc2_b), cview(d), cview(bc.act),
                                p.tensor(b.fc2_w), n, h, e);
    zero(d_fc1, n * h);
    kernels::gelu_backward<T>(d_fc1, cview(d_act), cview(bc.fc1));
    zero(d_ln2, n * e);
    kernels::linear_backward<T>(d_ln2, g(b.fc1_w), g(b.fc1_b), cview(d_fc1), cview(bc.ln2),
                                p.tensor(b.fc1_w), n, e, h);
    kernels::layernorm_backward<T>(d_y, g(b.ln2_g), g(b.ln2_b), cview(d_ln2), cview(bc.y),
                                   cview(bc.mean2), cview(bc.rstd2), p.tensor(b.ln2_g), n, e);
    // y = x + proj(attn(qkv(ln1(x))))
    zero(d_att, n * e);
    kernels::linear_backward<T>(d_att, g(b.proj_w), g(b.proj_b), cview(d_y), cview(bc.att),
                                p.tensor(b.proj_w), n, e, e);
    zero(d_qkv, n * 3 * e);
    kernels::attention_backward<T>(d_qkv, cview(d_att), cview(bc.qkv), cview(bc.probs), c.layout,
                                   e);
    zero(d_ln1, n * e);
    kernels::linear_backward<T>(d_ln1, g(b.qkv_w), g(b.qkv_b), cview(d_qkv), cview(bc.ln1),
                                p.tensor(b.qkv_w), n, e, 3 * e);
    d = d_y;
    kernels::layernorm_backward<T>(d, g(b.ln1_g), g(b.ln1_b), cview(d_ln1), cview(c.residual[l]),
                                   cview(bc.mean1), cview(bc.rstd1), p.tensor(b.ln1_g), n, e);
  }
}

template <class T>
void check_inputs(const ModelParams<T>& p, const Matrix<T>* ctx, const BatchInputs& in) {
  const auto& cfg = p.config;
  require(in.features == cfg.features, ErrorKind::kShape,
          "batch has " + std::to_string(in.features) + " features, model expects " +
              std::to_string(cfg.features));
  require(in.values.size() == in.samples * in.features, ErrorKind::kShape, "value buffer size");
  require(in.dec_source.size() == in.samples * in.features, ErrorKind::kShape,
          "decoder source size");
  require(in.enc_offsets.size() == in.samples + 1, ErrorKind::kShape, "encoder offsets size");
  if (cfg.has_context()) {
    require(ctx != nullptr, ErrorKind::kConfig, "model requires context embeddings");
    require(ctx->rows() == cfg.features && ctx->cols() == cfg.ctx_raw_dim, ErrorKind::kShape,
            "context matrix must be " + std::to_string(cfg.features) + "x" +
                std::to_string(cfg.ctx_raw_dim));
  }
}

template <class T>
void project_context(const ModelParams<T>& p, const Matrix<T>* ctx, std::size_t w, std::size_t b,
                     std::vector<T>& out) {
  const auto& cfg = p.config;
  if (!cfg.has_context()) {
    out.clear();
    return;
  }
  out.resize(cfg.features * cfg.ctx_dim());
  kernels::linear_forward<T>(out, ctx->flat(), p.tensor(w), p.tensor(b), cfg.features,
                             cfg.ctx_raw_dim, cfg.ctx_dim());
}

// Fills encoder input tokens (residual[0]).
template <class T>
void embed_tokens(const ModelParams<T>& p, const BatchInputs& in, ForwardCache<T>& c) {
  const auto& cfg = p.config;
  const std::size_t e = cfg.embed_dim;
  const std::size_t u = cfg.value_dim();
  const std::size_t cd = cfg.ctx_dim();
  const std::size_t k = cfg.features;
  auto& x0 = c.enc.residual.emplace_back();
  x0.assign(in.enc_columns.size() * e, T(0));
  const auto w = p.tensor(p.layout.val_enc_w);
  const auto bias = p.tensor(p.layout.val_enc_b);
  for (std::size_t n = 0; n < in.samples; ++n) {
    for (std::size_t t = in.enc_offsets[n]; t < in.enc_offsets[n + 1]; ++t) {
      const std::ptrdiff_t col = in.enc_columns[t];
      if (col < 0) continue;  // null token stays zero
      const auto cc = static_cast<std::size_t>(col);
      T* row = x0.data() + t * e;
      const T v = static_cast<T>(in.values[n * k + cc]);
      for (std::size_t j = 0; j < u; ++j) row[j] = w[j] * v + bias[j];
      for (std::size_t j = 0; j < cd; ++j) row[u + j] = c.ctx_enc[cc * cd + j];
      const auto pos = p.pos_table.row(cc);
      for (std::size_t j = 0; j < e; ++j) row[j] += pos[j];
    }
  }
}

template <class T>
void decoder_forward(const ModelParams<T>& p, const BatchInputs& in,
                     std::span<const T> latents, ForwardCache<T>& c) {
  const auto& cfg = p.config;
  const std::size_t e = cfg.embed_dim;
  const std::size_t u = cfg.value_dim();
  const std::size_t cd = cfg.ctx_dim();
  const std::size_t k = cfg.features;
  const std::size_t h = cfg.hidden_dim();
  const std::size_t slots = in.samples * k;
  const auto mask = p.tensor(p.layout.mask_token);

  c.dec_slots.resize(slots * e);
  for (std::size_t s = 0; s < slots; ++s) {
    const std::ptrdiff_t src = in.dec_source[s];
    const T* from = src >= 0 ? latents.data() + static_cast<std::size_t>(src) * e : mask.data();
    std::copy_n(from, e, c.dec_slots.data() + s * e);
  }
  c.dec_values.resize(slots * u);
  kernels::linear_forward<T>(c.dec_values, cview(c.dec_slots), p.tensor(p.layout.val_dec_w),
                             p.tensor(p.layout.val_dec_b), slots, e, u);

  c.dec.layout = kernels::make_layout(cfg.heads);
  for (std::size_t n = 0; n < in.samples; ++n) c.dec.layout.add_sequence(k);
  c.dec.residual.clear();
  auto& z0 = c.dec.residual.emplace_back(slots * e);
  for (std::size_t s = 0; s < slots; ++s) {
    const std::size_t col = s % k;
    T* row = z0.data() + s * e;
    std::copy_n(c.dec_values.data() + s * u, u, row);
    for (std::size_t j = 0; j < cd; ++j) row[u + j] = c.ctx_dec[col * cd + j];
    const auto pos = p.pos_table.row(col);
    for (std::size_t j = 0; j < e; ++j) row[j] += pos[j];
  }
  stack_forward(p, p.layout.dec, c.dec, "decoder");

  const auto& z = c.dec.residual.back();
  c.head_hidden.resize(slots * h);
  kernels::linear_forward<T>(c.head_hidden, cview(z), p.tensor(p.layout.head_w1),
                             p.tensor(p.layout.head_b1), slots, e, h);
  c.head_act.resize(slots * h);
  kernels::gelu_forward<T>(c.head_act, cview(c.head_hidden));
  c.output.resize(slots);
  kernels::linear_forward<T>(c.output, cview(c.head_act), p.tensor(p.layout.head_w2),
                             p.tensor(p.layout.head_b2), slots, h, 1);
  check_finite<T>(cview(c.output), "output head");
}

}  // namespace

std::size_t ModelConfig::ctx_dim() const {
  if (ctx_raw_dim == 0) return 0;
  return static_cast<std::size_t>(std::llround(ctx_fraction * static_cast<double>(embed_dim)));
}

void ModelConfig::validate() const {
  require(features >= 1, ErrorKind::kConfig, "model needs at least one feature");
  require(embed_dim >= 2 && embed_dim % 2 == 0, ErrorKind::kConfig,
          "embedding width must be even and >= 2");
  require(heads >= 1 && embed_dim % heads == 0, ErrorKind::kConfig,
          "embedding width must be divisible by the head count");
  require(mlp_ratio >= 1, ErrorKind::kConfig, "mlp_ratio must be >= 1");
  require(ctx_fraction >= 0.0 && ctx_fraction < 1.0, ErrorKind::kConfig,
          "ctx_fraction must lie in [0, 1)");
  if (has_context()) {
    require(ctx_dim() >= 1 && ctx_dim() < embed_dim, ErrorKind::kConfig,
            "context block width must lie in [1, E) when context is present");
  }
}

std::string_view to_string(LossMode mode) {
  switch (mode) {
    case LossMode::kBoth: return "both";
    case LossMode::kObserved: return "observed";
    case LossMode::kMasked: return "masked";
  }
  return "both";
}

LossMode parse_loss_mode(std::string_view text) {
  if (text == "both") return LossMode::kBoth;
  if (text == "observed") return LossMode::kObserved;
  if (text == "masked") return LossMode::kMasked;
  fail(ErrorKind::kInvalidArgument, "unknown loss mode '" + std::string(text) + "'");
}

ParamLayout::ParamLayout(const ModelConfig& config) {
  config.validate();
  const std::size_t e = config.embed_dim;
  const std::size_t u = config.value_dim();
  const std::size_t c = config.ctx_dim();
  const std::size_t r = config.ctx_raw_dim;
  const std::size_t h = config.hidden_dim();
  val_enc_w = add("value_enc.weight", 1, u, true);
  val_enc_b = add("value_enc.bias", 1, u, false);
  ctx_enc_w = add("context_enc.weight", r, c, true);
  ctx_enc_b = add("context_enc.bias", 1, c, false);
  for (std::size_t i = 0; i < config.enc_depth; ++i) {
    enc.push_back(add_block("encoder." + std::to_string(i), e, h));
  }
  mask_token = add("mask_token", 1, e, false);
  val_dec_w = add("value_dec.weight", e, u, true);
  val_dec_b = add("value_dec.bias", 1, u, false);
  ctx_dec_w = add("context_dec.weight", r, c, true);
  ctx_dec_b = add("context_dec.bias", 1, c, false);
  for (std::size_t i = 0; i < config.dec_depth; ++i) {
    dec.push_back(add_block("decoder." + std::to_string(i), e, h));
  }
  head_w1 = add("head.fc1.weight", e, h, true);
  head_b1 = add("head.fc1.bias", 1, h, false);
  head_w2 = add("head.fc2.weight", h, 1, true);
  head_b2 = add("head.fc2.bias", 1, 1, false);
}

std::size_t ParamLayout::add(std::string name, std::size_t rows, std::size_t cols, bool decay) {
  tensors_.push_back({std::move(name), rows, cols, total_, decay});
  total_ += rows * cols;
  return tensors_.size() - 1;
}

ParamLayout::Block ParamLayout::add_block(const std::string& prefix, std::size_t e,
                                          std::size_t h) {
  Block b{};
  b.ln1_g = add(prefix + ".norm1.weight", 1, e, true);
  b.ln1_b = add(prefix + ".norm1.bias", 1, e, false);
  b.qkv_w = add(prefix + ".attn.qkv.weight", e, 3 * e, true);
  b.qkv_b = add(prefix + ".attn.qkv.bias", 1, 3 * e, false);
  b.proj_w = add(prefix + ".attn.proj.weight", e, e, true);
  b.proj_b = add(prefix + ".attn.proj.bias", 1, e, false);
  b.ln2_g = add(prefix + ".norm2.weight", 1, e, true);
  b.ln2_b = add(prefix + ".norm2.bias", 1, e, false);
  b.fc1_w = add(prefix + ".mlp.fc1.weight", e, h, true);
  b.fc1_b = add(prefix + ".mlp.fc1.bias", 1, h, false);
  b.fc2_w = add(prefix + ".mlp.fc2.weight", h, e, true);
  b.fc2_b = add(prefix + ".mlp.fc2.bias", 1, e, false);
  return b;
}

Matrix<double> positional_table(std::size_t features, std::size_t embed_dim) {
  require(embed_dim % 2 == 0 && embed_dim > 0, ErrorKind::kConfig,
          "positional table needs an even width");
  Matrix<double> p(features, embed_dim);
  for (std::size_t k = 0; k < features; ++k) {
    for (std::size_t i = 0; i < embed_dim / 2; ++i) {
      const double freq =
          std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(embed_dim));
      const double angle = static_cast<double>(k) / freq;
      p(k, 2 * i) = std::sin(angle);
      p(k, 2 * i + 1) = std::cos(angle);
    }
  }
  return p;
}

template <class T>
ModelParams<T>::ModelParams(const ModelConfig& cfg)
    : config(cfg), layout(cfg), values(layout.total(), T(0)),
      pos_table(cfg.features, cfg.embed_dim) {
  const auto p = positional_table(cfg.features, cfg.embed_dim);
  for (std::size_t i = 0; i < p.size(); ++i) pos_table.flat()[i] = static_cast<T>(p.flat()[i]);
}

template <class T>
ModelParams<T> init_params(const ModelConfig& config, Rng& rng, double stddev) {
  ModelParams<T> params(config);
  auto trunc_normal = [&]() {
    for (;;) {
      const double z = rng.normal();
      if (std::abs(z) <= 2.0) return static_cast<T>(z * stddev);
    }
  };
  for (std::size_t i = 0; i < params.layout.tensors().size(); ++i) {
    const auto& spec = params.layout[i];
    auto t = params.tensor(i);
    const bool is_gain = spec.name.find("norm") != std::string::npos && spec.decay;
    if (is_gain) {
      std::fill(t.begin(), t.end(), T(1));
    } else if (spec.decay || i == params.layout.mask_token) {
      for (auto& v : t) v = trunc_normal();
    }
  }
  return params;
}

template <class To, class From>
ModelParams<To> cast_params(const ModelParams<From>& params) {
  ModelParams<To> out(params.config);
  std::transform(params.values.begin(), params.values.end(), out.values.begin(),
                 [](From v) { return static_cast<To>(v); });
  return out;
}

BatchInputs make_training_inputs(const MaskedBatch& batch, const Matrix<double>& scaled,
                                 LossMode mode) {
  const std::size_t b = batch.size();
  const std::size_t k = scaled.cols();
  require(scaled.rows() == b, ErrorKind::kShape, "batch rows differ from value rows");
  BatchInputs in;
  in.samples = b;
  in.features = k;
  in.values.assign(b * k, 0.0);
  in.dec_source.assign(b * k, -1);
  in.loss_weight.assign(b * k, 0.0);
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t c = 0; c < k; ++c) {
      const double v = scaled(n, c);
      in.values[n * k + c] = std::isfinite(v) ? v : 0.0;
    }
    const auto& obs = batch.observed_sets[n];
    const auto& msk = batch.masked_sets[n];
    require(!obs.empty(), ErrorKind::kInvalidBatch,
            "sample " + std::to_string(n) + " has an empty observed set");
    for (std::size_t j = 0; j < obs.size(); ++j) {
      const std::size_t t = in.enc_columns.size();
      in.enc_columns.push_back(static_cast<std::ptrdiff_t>(obs[j]));
      in.dec_source[n * k + obs[j]] = static_cast<std::ptrdiff_t>(t);
    }
    for (std::size_t j = 0; j < batch.pad_counts[n]; ++j) in.enc_columns.push_back(-1);
    in.enc_offsets.push_back(in.enc_columns.size());
    if (mode != LossMode::kMasked) {
      const double w = inv_b / static_cast<double>(obs.size());
      for (auto c : obs) in.loss_weight[n * k + c] = w;
    }
    if (mode != LossMode::kObserved && !msk.empty()) {
      const double w = inv_b / static_cast<double>(msk.size());
      for (auto c : msk) in.loss_weight[n * k + c] = w;
    }
  }
  return in;
}

BatchInputs make_inference_inputs(const Matrix<double>& scaled, const Mask& observed) {
  const std::size_t b = scaled.rows();
  const std::size_t k = scaled.cols();
  require(observed.rows() == b && observed.cols() == k, ErrorKind::kShape,
          "observed mask shape differs from values");
  BatchInputs in;
  in.samples = b;
  in.features = k;
  in.values.assign(b * k, 0.0);
  in.dec_source.assign(b * k, -1);
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t c = 0; c < k; ++c) {
      if (!observed(n, c)) continue;
      in.values[n * k + c] = scaled(n, c);
      in.dec_source[n * k + c] = static_cast<std::ptrdiff_t>(in.enc_columns.size());
      in.enc_columns.push_back(static_cast<std::ptrdiff_t>(c));
    }
    require(in.enc_columns.size() > in.enc_offsets.back(), ErrorKind::kRow,
            "row " + std::to_string(n) + " has no observed feature");
    in.enc_offsets.push_back(in.enc_columns.size());
  }
  return in;
}

template <class T>
void forward(const ModelParams<T>& params, const Matrix<T>* ctx, const BatchInputs& inputs,
             ForwardCache<T>& cache) {
  check_inputs(params, ctx, inputs);
  const auto& lay = params.layout;
  project_context(params, ctx, lay.ctx_enc_w, lay.ctx_enc_b, cache.ctx_enc);
  project_context(params, ctx, lay.ctx_dec_w, lay.ctx_dec_b, cache.ctx_dec);

  cache.enc.layout = kernels::make_layout(params.config.heads);
  for (std::size_t n = 0; n < inputs.samples; ++n) {
    cache.enc.layout.add_sequence(inputs.enc_offsets[n + 1] - inputs.enc_offsets[n]);
  }
  cache.enc.residual.clear();
  embed_tokens(params, inputs, cache);
  stack_forward(params, lay.enc, cache.enc, "encoder");
  decoder_forward(params, inputs, cview(cache.enc.residual.back()), cache);
}

template <class T>
double batch_loss(const BatchInputs& inputs, const ForwardCache<T>& cache) {
  double loss = 0.0;
  for (std::size_t i = 0; i < inputs.loss_weight.size(); ++i) {
    const double w = inputs.loss_weight[i];
    if (w == 0.0) continue;
    const double r = static_cast<double>(cache.output[i]) - inputs.values[i];
    loss += w * r * r;
  }
  return loss;
}

template <class T>
void backward(const ModelParams<T>& params, const Matrix<T>* ctx, const BatchInputs& inputs,
              ForwardCache<T>& cache, std::span<const T> d_output, std::span<T> grads) {
  const auto& cfg = params.config;
  const auto& lay = params.layout;
  const std::size_t e = cfg.embed_dim;
  const std::size_t u = cfg.value_dim();
  const std::size_t cd = cfg.ctx_dim();
  const std::size_t k = cfg.features;
  const std::size_t h = cfg.hidden_dim();
  const std::size_t slots = inputs.samples * k;
  require(grads.size() == lay.total(), ErrorKind::kShape, "gradient buffer size");
  auto g = [&](std::size_t idx) { return grads.subspan(lay[idx].offset, lay[idx].size()); };

  // Head.
  std::vector<T> d_act(slots * h, T(0));
  kernels::linear_backward<T>(d_act, g(lay.head_w2), g(lay.head_b2), d_output,
                              cview(cache.head_act), params.tensor(lay.head_w2), slots, h, 1);
  std::vector<T> d_hidden(slots * h, T(0));
  kernels::gelu_backward<T>(d_hidden, cview(d_act), cview(cache.head_hidden));
  std::vector<T> d_z(slots * e, T(0));
  kernels::linear_backward<T>(d_z, g(lay.head_w1), g(lay.head_b1), cview(d_hidden),
                              cview(cache.dec.residual.back()), params.tensor(lay.head_w1),
                              slots, e, h);

  // Decoder stack, then split z0 = [V | C'] + P.
  stack_backward(params, lay.dec, cache.dec, d_z, grads);
  std::vector<T> d_values(slots * u);
  std::vector<T> d_ctx_dec(k * cd, T(0));
  for (std::size_t s = 0; s < slots; ++s) {
    std::copy_n(d_z.data() + s * e, u, d_values.data() + s * u);
    const std::size_t col = s % k;
    for (std::size_t j = 0; j < cd; ++j) d_ctx_dec[col * cd + j] += d_z[s * e + u + j];
  }
  std::vector<T> d_slots(slots * e, T(0));
  kernels::linear_backward<T>(d_slots, g(lay.val_dec_w), g(lay.val_dec_b), cview(d_values),
                              cview(cache.dec_slots), params.tensor(lay.val_dec_w), slots, e, u);
  if (cfg.has_context()) {
    kernels::linear_backward<T>({}, g(lay.ctx_dec_w), g(lay.ctx_dec_b), cview(d_ctx_dec),
                                ctx->flat(), params.tensor(lay.ctx_dec_w), k, cfg.ctx_raw_dim,
                                cd);
  }

  // Route slot gradients to encoder latents or [MASK].
  const std::size_t enc_tokens = cache.enc.layout.tokens();
  std::vector<T> d_latent(enc_tokens * e, T(0));
  auto d_mask = g(lay.mask_token);
  for (std::size_t s = 0; s < slots; ++s) {
    const std::ptrdiff_t src = inputs.dec_source[s];
    T* to = src >= 0 ? d_latent.data() + static_cast<std::size_t>(src) * e : d_mask.data();
    for (std::size_t j = 0; j < e; ++j) to[j] += d_slots[s * e + j];
  }

  // Encoder stack and token embedding.
  stack_backward(params, lay.enc, cache.enc, d_latent, grads);
  auto d_vw = g(lay.val_enc_w);
  auto d_vb = g(lay.val_enc_b);
  std::vector<T> d_ctx_enc(k * cd, T(0));
  for (std::size_t n = 0; n < inputs.samples; ++n) {
    for (std::size_t t = inputs.enc_offsets[n]; t < inputs.enc_offsets[n + 1]; ++t) {
      const std::ptrdiff_t col = inputs.enc_columns[t];
      if (col < 0) continue;
      const auto cc = static_cast<std::size_t>(col);
      const T v = static_cast<T>(inputs.values[n * k + cc]);
      const T* dt = d_latent.data() + t * e;
      for (std::size_t j = 0; j < u; ++j) {
        d_vw[j] += dt[j] * v;
        d_vb[j] += dt[j];
      }
      for (std::size_t j = 0; j < cd; ++j) d_ctx_enc[cc * cd + j] += dt[u + j];
    }
  }
  if (cfg.has_context()) {
    kernels::linear_backward<T>({}, g(lay.ctx_enc_w), g(lay.ctx_enc_b), cview(d_ctx_enc),
                                ctx->flat(), params.tensor(lay.ctx_enc_w), k, cfg.ctx_raw_dim,
                                cd);
  }
}

template <class T>
double loss_and_gradients(const ModelParams<T>& params, const Matrix<T>* ctx,
                          const BatchInputs& inputs, ForwardCache<T>& cache,
                          std::vector<T>& grads) {
  require(inputs.loss_weight.size() == inputs.samples * inputs.features, ErrorKind::kShape,
          "loss weights missing");
  forward(params, ctx, inputs, cache);
  const double loss = batch_loss(inputs, cache);
  std::vector<T> d_out(cache.output.size());
  for (std::size_t i = 0; i < d_out.size(); ++i) {
    const double w = inputs.loss_weight[i];
    d_out[i] = w == 0.0 ? T(0)
                        : static_cast<T>(2.0 * w *
                                         (static_cast<double>(cache.output[i]) - inputs.values[i]));
  }
  grads.assign(params.layout.total(), T(0));
  backward(params, ctx, inputs, cache, cview(d_out), std::span<T>(grads));
  for (T v : grads) {
    if (!std::isfinite(v)) fail(ErrorKind::kNumeric, "non-finite gradient");
  }
  return loss;
}

template <class T>
Matrix<T> embed_sample(const ModelParams<T>& params, std::span<const double> x,
                       const Matrix<T>* ctx) {
  const std::size_t k = params.config.features;
  require(x.size() == k, ErrorKind::kShape, "sample width differs from model features");
  Matrix<double> row(1, k);
  Mask all(1, k, 1);
  for (std::size_t c = 0; c < k; ++c) row(0, c) = std::isfinite(x[c]) ? x[c] : 0.0;
  const BatchInputs in = make_inference_inputs(row, all);
  check_inputs(params, ctx, in);
  ForwardCache<T> cache;
  project_context(params, ctx, params.layout.ctx_enc_w, params.layout.ctx_enc_b, cache.ctx_enc);
  embed_tokens(params, in, cache);
  Matrix<T> out(k, params.config.embed_dim);
  std::copy(cache.enc.residual[0].begin(), cache.enc.residual[0].end(), out.data());
  return out;
}

template <class T>
Matrix<T> encode(const ModelParams<T>& params, const Matrix<T>& tokens) {
  require(tokens.cols() == params.config.embed_dim && tokens.rows() >= 1, ErrorKind::kShape,
          "encoder input must be L×E with L >= 1");
  StackCache<T> c;
  c.layout = kernels::make_layout(params.config.heads);
  c.layout.add_sequence(tokens.rows());
  c.residual.emplace_back(tokens.flat().begin(), tokens.flat().end());
  stack_forward(params, params.layout.enc, c, "encoder");
  Matrix<T> out(tokens.rows(), tokens.cols());
  std::copy(c.residual.back().begin(), c.residual.back().end(), out.data());
  return out;
}

template <class T>
Matrix<T> decode_batch(const ModelParams<T>& params, const Matrix<T>& latents,
                       const BatchInputs& inputs, const Matrix<T>* ctx) {
  check_inputs(params, ctx, inputs);
  require(latents.rows() == inputs.enc_columns.size() &&
              latents.cols() == params.config.embed_dim,
          ErrorKind::kShape, "latents do not align with encoder tokens");
  ForwardCache<T> cache;
  project_context(params, ctx, params.layout.ctx_dec_w, params.layout.ctx_dec_b, cache.ctx_dec);
  decoder_forward(params, inputs, latents.flat(), cache);
  Matrix<T> out(inputs.samples, inputs.features);
  std::copy(cache.output.begin(), cache.output.end(), out.data());
  return out;
}

template <class T>
Matrix<T> context_matrix(const Matrix<double>& ctx) {
  Matrix<T> out(ctx.rows(), ctx.cols());
  std::transform(ctx.flat().begin(), ctx.flat().end(), out.data(),
                 [](double v) { return static_cast<T>(v); });
  return out;
}

#define CACTI_MODEL_INSTANTIATE(T)                                                              \
  template struct ModelParams<T>;                                                               \
  template ModelParams<T> init_params<T>(const ModelConfig&, Rng&, double);                     \
  template void forward<T>(const ModelParams<T>&, const Matrix<T>*, const BatchInputs&,         \
                           ForwardCache<T>&);                                                   \
  template double batch_loss<T>(const BatchInputs&, const ForwardCache<T>&);                    \
  template void backward<T>(const ModelParams<T>&, const Matrix<T>*, const BatchInputs&,        \
                            ForwardCache<T>&, std::span<const T>, std::span<T>);                \
  template double loss_and_gradients<T>(const ModelParams<T>&, const Matrix<T>*,                \
                                        const BatchInputs&, ForwardCache<T>&,                   \
                                        std::vector<T>&);                                       \
  template Matrix<T> embed_sample<T>(const ModelParams<T>&, std::span<const double>,            \
                                     const Matrix<T>*);                                         \
  template Matrix<T> encode<T>(const ModelParams<T>&, const Matrix<T>&);                        \
  template Matrix<T> decode_batch<T>(const ModelParams<T>&, const Matrix<T>&,                   \
                                     const BatchInputs&, const Matrix<T>*);                     \
  template Matrix<T> context_matrix<T>(const Matrix<double>&);

CACTI_MODEL_INSTANTIATE(float)
CACTI_MODEL_INSTANTIATE(double)

template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);
template ModelParams<double> cast_params<double, double>(const ModelParams<double>&);
template ModelParams<float> cast_params<float, float>(const ModelParams<float>&);

}  // namespace cacti
