// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include "cacti/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "cacti/dataset.hpp"
#include "cacti/error.hpp"
#include "json.hpp"

namespace cacti {

void TrainConfig::validate() const {
  require(epochs >= 1, ErrorKind::kConfig, "epochs must be >= 1");
  require(batch_size >= 1, ErrorKind::kConfig, "batch_size must be >= 1");
  require(warmup_epochs < epochs, ErrorKind::kConfig, "warmup_epochs must be < epochs");
  require(lr > 0.0, ErrorKind::kConfig, "lr must be > 0");
  require(min_lr >= 0.0 && min_lr <= lr, ErrorKind::kConfig, "min_lr must lie in [0, lr]");
  require(weight_decay >= 0.0, ErrorKind::kConfig, "weight_decay must be >= 0");
  require(grad_clip > 0.0, ErrorKind::kConfig, "grad_clip must be > 0");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorKind::kConfig,
          "betas must lie in [0, 1)");
  require(eps > 0.0, ErrorKind::kConfig, "eps must be > 0");
  require(p_cm >= 0.0 && p_cm <= 1.0, ErrorKind::kConfig, "p_cm must lie in [0, 1]");
  require(random_ratio > 0.0 && random_ratio < 1.0, ErrorKind::kConfig,
          "random_ratio must lie in (0, 1)");
}

void apply_config_json(std::string_view json_text, TrainConfig& cfg, ModelConfig* model) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorKind::kConfig, "config must be a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const json& v = it.value();
      if (k == "epochs") cfg.epochs = v.get<std::size_t>();
      else if (k == "batch_size") cfg.batch_size = v.get<std::size_t>();
      else if (k == "lr") cfg.lr = v.get<double>();
      else if (k == "betas") {
        const auto b = v.get<std::vector<double>>();
        require(b.size() == 2, ErrorKind::kConfig, "betas needs two values");
        cfg.beta1 = b[0];
        cfg.beta2 = b[1];
      } else if (k == "eps") cfg.eps = v.get<double>();
      else if (k == "weight_decay") cfg.weight_decay = v.get<double>();
      else if (k == "warmup_epochs") cfg.warmup_epochs = v.get<std::size_t>();
      else if (k == "min_lr") cfg.min_lr = v.get<double>();
      else if (k == "grad_clip") cfg.grad_clip = v.get<double>();
      else if (k == "p_cm") cfg.p_cm = v.get<double>();
      else if (k == "random_ratio") cfg.random_ratio = v.get<double>();
      else if (k == "mask_strategy") cfg.mask_strategy = parse_mask_strategy(v.get<std::string>());
      else if (k == "loss_mode") cfg.loss_mode = parse_loss_mode(v.get<std::string>());
      else if (k == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (k == "model" && model != nullptr) {
        for (auto m = v.begin(); m != v.end(); ++m) {
          const std::string& mk = m.key();
          if (mk == "embed_dim") model->embed_dim = m->get<std::size_t>();
          else if (mk == "ctx_fraction") model->ctx_fraction = m->get<double>();
          else if (mk == "enc_depth") model->enc_depth = m->get<std::size_t>();
          else if (mk == "dec_depth") model->dec_depth = m->get<std::size_t>();
          else if (mk == "heads") model->heads = m->get<std::size_t>();
          else if (mk == "mlp_ratio") model->mlp_ratio = m->get<std::size_t>();
          else fail(ErrorKind::kConfig, "unknown model key '" + mk + "'");
        }
      } else {
        fail(ErrorKind::kConfig, "unknown config key '" + k + "'");
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("bad config value: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    fail(ErrorKind::kConfig, e.what());
  }
}

std::string to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j{
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"lr", cfg.lr},
      {"betas", {cfg.beta1, cfg.beta2}},
      {"eps", cfg.eps},
      {"weight_decay", cfg.weight_decay},
      {"warmup_epochs", cfg.warmup_epochs},
      {"min_lr", cfg.min_lr},
      {"grad_clip", cfg.grad_clip},
      {"p_cm", cfg.p_cm},
      {"random_ratio", cfg.random_ratio},
      {"mask_strategy", std::string(to_string(cfg.mask_strategy))},
      {"loss_mode", std::string(to_string(cfg.loss_mode))},
      {"seed", cfg.seed},
  };
  return j.dump(2);
}

double lr_at(std::size_t step, std::size_t steps_per_epoch, const TrainConfig& cfg) {
  const std::size_t warmup = cfg.warmup_epochs * steps_per_epoch;
  const std::size_t total = cfg.epochs * steps_per_epoch;
  if (step < warmup) return cfg.lr * static_cast<double>(step) / static_cast<double>(warmup);
  // Cosine from lr at the first post-warmup step to min_lr at the last step.
  const double span = static_cast<double>(std::max<std::size_t>(1, total - 1 - warmup));
  const double t = std::clamp(static_cast<double>(step - warmup) / span, 0.0, 1.0);
  return cfg.min_lr + 0.5 * (cfg.lr - cfg.min_lr) * (1.0 + std::cos(std::numbers::pi * t));
}

template <class T>
void adamw_update(std::span<T> param, std::span<const T> grad, std::span<double> m,
                  std::span<double> v, std::size_t t, double lr, const AdamWHyper& hyper,
                  bool decay) {
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
  const double shrink = decay ? 1.0 - lr * hyper.weight_decay : 1.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
    v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    double p = static_cast<double>(param[i]) * shrink;
    p -= lr * mhat / (std::sqrt(vhat) + hyper.eps);
    param[i] = static_cast<T>(p);
  }
}

template <class T>
void adamw_step(ModelParams<T>& params, std::span<const T> grads, AdamWState<T>& state,
                double lr, const AdamWHyper& hyper) {
  const std::size_t n = params.values.size();
  require(grads.size() == n, ErrorKind::kShape, "gradient size differs from parameters");
  if (state.m.size() != n) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  ++state.step;
  for (const auto& spec : params.layout.tensors()) {
    if (spec.size() == 0) continue;
    adamw_update<T>(std::span<T>(params.values).subspan(spec.offset, spec.size()),
                    grads.subspan(spec.offset, spec.size()),
                    std::span<double>(state.m).subspan(spec.offset, spec.size()),
                    std::span<double>(state.v).subspan(spec.offset, spec.size()), state.step, lr,
                    hyper, spec.decay);
  }
  for (T p : params.values) {
    if (!std::isfinite(p)) {
      fail(ErrorKind::kNumeric, "non-finite parameter after step " + std::to_string(state.step));
    }
  }
}

template <class T>
double clip_global_norm(std::span<T> grads, double max_norm) {
  double sq = 0.0;
  for (T g : grads) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / (norm + 1e-6);
    for (T& g : grads) g = static_cast<T>(static_cast<double>(g) * scale);
  }
  return norm;
}

namespace {

template <class T>
Matrix<T> gather_rows(const Matrix<T>& m, std::span<const std::size_t> rows) {
  Matrix<T> out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

TrainResult train(const Matrix<double>& scaled, const Mask& observed, const Matrix<double>* ctx,
                  const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  model_cfg.validate();
  const std::size_t n = scaled.rows();
  const std::size_t k = scaled.cols();
  require(n > 0, ErrorKind::kInvalidInput, "training set is empty");
  require(k == model_cfg.features, ErrorKind::kShape, "table width differs from model features");
  require(observed.rows() == n && observed.cols() == k, ErrorKind::kShape,
          "observed mask shape differs from values");
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = observed.row(r);
    require(std::any_of(row.begin(), row.end(), [](auto v) { return v != 0; }), ErrorKind::kRow,
            "training row " + std::to_string(r) + " has no observed feature");
  }
  if (model_cfg.has_context()) {
    require(ctx != nullptr, ErrorKind::kConfig, "model requires context embeddings");
  }

  Rng init_rng(derive_seed(cfg.seed, stream_id("init")));
  Rng rng(derive_seed(cfg.seed, stream_id("train")));
  TrainResult result{init_params<float>(model_cfg, init_rng), {}};
  auto& params = result.params;
  const Matrix<float> ctx_f =
      model_cfg.has_context() ? context_matrix<float>(*ctx) : Matrix<float>();
  const Matrix<float>* ctx_ptr = model_cfg.has_context() ? &ctx_f : nullptr;

  const std::size_t spe = (n + cfg.batch_size - 1) / cfg.batch_size;
  const AdamWHyper hyper{cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay};
  AdamWState<float> opt;
  ForwardCache<float> cache;
  std::vector<float> grads;
  std::vector<std::size_t> order(n);
  std::size_t step = 0;
  bool first = true;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Mask copy_mask;
    if (cfg.mask_strategy != MaskStrategy::kRandom) {
      copy_mask = naive_copy_mask(observed, cfg.p_cm, rng);
    }
    order = rng.permutation(n);
    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> ids(order.data() + start, end - start);
      const Mask obs_b = gather_rows(observed, ids);
      const Matrix<double> x_b = gather_rows(scaled, ids);
      std::vector<std::size_t> id_vec(ids.begin(), ids.end());
      MaskedBatch batch;
      switch (cfg.mask_strategy) {
        case MaskStrategy::kMtcm:
          batch = mtcm_build_batch(obs_b, gather_rows(copy_mask, ids), rng, std::move(id_vec));
          break;
        case MaskStrategy::kNaiveCm:
          batch = naive_cm_build_batch(obs_b, gather_rows(copy_mask, ids), rng, std::move(id_vec));
          break;
        case MaskStrategy::kRandom:
          batch = random_mask(obs_b, cfg.random_ratio, rng, std::move(id_vec));
          break;
      }
      if (first && hooks.on_first_batch) hooks.on_first_batch(batch);
      first = false;
      const BatchInputs in = make_training_inputs(batch, x_b, cfg.loss_mode);
      const double loss = loss_and_gradients(params, ctx_ptr, in, cache, grads);
      loss_sum += loss * static_cast<double>(ids.size());
      clip_global_norm<float>(grads, cfg.grad_clip);
      if (hooks.on_step) {
        double sq = 0.0;
        for (float g : grads) sq += static_cast<double>(g) * g;
        hooks.on_step(std::sqrt(sq));
      }
      lr = lr_at(step, spe, cfg);
      try {
        adamw_step<float>(params, grads, opt, lr, hyper);
      } catch (const Error& e) {
        fail(e.kind(), std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")");
      }
      ++step;
    }
    EpochStats stats{epoch, loss_sum / static_cast<double>(n), lr};
    result.trace.push_back(stats);
    if (hooks.on_epoch) hooks.on_epoch(stats);
  }
  return result;
}

void write_loss_trace(const std::filesystem::path& path, const std::vector<EpochStats>& trace) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot open " + path.string());
  out << "epoch,mean_loss,lr\n";
  for (const auto& s : trace) {
    out << s.epoch << ',' << format_number(s.mean_loss) << ',' << format_number(s.lr) << '\n';
  }
}

#define CACTI_TRAINING_INSTANTIATE(T)                                                        \
  template void adamw_update<T>(std::span<T>, std::span<const T>, std::span<double>,         \
                                std::span<double>, std::size_t, double, const AdamWHyper&,   \
                                bool);                                                       \
  template void adamw_step<T>(ModelParams<T>&, std::span<const T>, AdamWState<T>&, double,   \
                              const AdamWHyper&);                                            \
  template double clip_global_norm<T>(std::span<T>, double);

CACTI_TRAINING_INSTANTIATE(float)
CACTI_TRAINING_INSTANTIATE(double)

}  // namespace cacti
