// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training loop: per-epoch copy-mask regeneration, masked batching, AdamW
// with linear warmup and cosine decay, global-norm gradient clipping.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cacti/masking.hpp"
#include "cacti/matrix.hpp"
#include "cacti/model.hpp"

namespace cacti {

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  double beta1 = 0.90;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.05;
  std::size_t warmup_epochs = 50;
  double min_lr = 1e-5;
  double grad_clip = 5.0;
  double p_cm = 0.90;
  /// Per-cell masking probability of the random strategy.
  double random_ratio = 0.5;
  MaskStrategy mask_strategy = MaskStrategy::kMtcm;
  LossMode loss_mode = LossMode::kBoth;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Reads the keys of a JSON object into `cfg`; unknown keys are a config
/// error. Model keys live under "model" and go to `model` when non-null.
void apply_config_json(std::string_view json_text, TrainConfig& cfg, ModelConfig* model);
std::string to_json(const TrainConfig& cfg);

/// Learning rate at optimizer step `step` (0-based) of a run with
/// cfg.epochs · steps_per_epoch steps.
double lr_at(std::size_t step, std::size_t steps_per_epoch, const TrainConfig& cfg);

struct AdamWHyper {
  double beta1 = 0.90;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// One AdamW update of a single tensor. `t` is the 1-based step count used
/// for bias correction; moments are kept in double.
template <class T>
void adamw_update(std::span<T> param, std::span<const T> grad, std::span<double> m,
                  std::span<double> v, std::size_t t, double lr, const AdamWHyper& hyper,
                  bool decay);

template <class T>
struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

/// AdamW over every tensor of `params`; decay follows TensorSpec::decay.
template <class T>
void adamw_step(ModelParams<T>& params, std::span<const T> grads, AdamWState<T>& state,
                double lr, const AdamWHyper& hyper);

/// Scales `grads` so its L2 norm is at most `max_norm`; returns the norm
/// before clipping.
template <class T>
double clip_global_norm(std::span<T> grads, double max_norm);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double lr = 0.0;        // rate of the epoch's last step
};

struct TrainHooks {
  std::function<void(const EpochStats&)> on_epoch;
  /// Called with the very first batch (e.g. to dump it as JSON).
  std::function<void(const MaskedBatch&)> on_first_batch;
  /// Called after every clipped step with the post-clip gradient norm.
  std::function<void(double)> on_step;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<EpochStats> trace;
};

/// Trains a fresh model on `scaled` (N×K, min-max scaled, NaN where
/// `observed` is 0). `ctx` is K×ctx_raw_dim, or null for a context-free model.
TrainResult train(const Matrix<double>& scaled, const Mask& observed, const Matrix<double>* ctx,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const TrainHooks& hooks = {});

void write_loss_trace(const std::filesystem::path& path, const std::vector<EpochStats>& trace);

}  // namespace cacti
