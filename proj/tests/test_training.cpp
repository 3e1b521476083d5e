// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "cacti/dataset.hpp"
#include "cacti/rng.hpp"
#include "cacti/training.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cacti;
using cacti::test::error_kind;

namespace {

// Noiseless linear data in [0, 1]: column k = a_k · z + b_k.
Matrix<double> linear_data(std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  Matrix<double> x(n, k);
  for (std::size_t r = 0; r < n; ++r) {
    const double z = rng.uniform();
    for (std::size_t c = 0; c < k; ++c) {
      const double a = (c % 2 == 0) ? 1.0 : -1.0;
      x(r, c) = 0.5 + a * 0.4 * (z - 0.5) * (1.0 + 0.1 * static_cast<double>(c));
    }
  }
  return x;
}

ModelConfig small_model(std::size_t k) {
  ModelConfig m;
  m.features = k;
  m.embed_dim = 16;
  m.heads = 2;
  m.enc_depth = 1;
  m.dec_depth = 1;
  return m;
}

TrainConfig short_run(std::size_t epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.warmup_epochs = epochs / 10;
  t.batch_size = 16;
  t.seed = 1;
  return t;
}

}  // namespace

TEST_CASE("lr schedule pins") {
  TrainConfig cfg;  // 300 epochs, 50 warmup, 1e-3 → 1e-5
  const std::size_t spe = 7;
  const std::size_t total = cfg.epochs * spe;
  const std::size_t w = cfg.warmup_epochs * spe;
  CHECK(lr_at(0, spe, cfg) == 0.0);
  CHECK(lr_at(w, spe, cfg) == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK(lr_at(total - 1, spe, cfg) == doctest::Approx(1e-5).epsilon(1e-12));
  // Continuous at the junction: the ramp approaches lr from below.
  CHECK(std::abs(lr_at(w - 1, spe, cfg) - 1e-3) <= 1e-3 / static_cast<double>(w) + 1e-15);
  CHECK(lr_at(w / 2, spe, cfg) == doctest::Approx(0.5e-3 * static_cast<double>(w / 2) /
                                                  (static_cast<double>(w) / 2.0)));
  double prev = 1.0;
  for (std::size_t s = w; s < total; ++s) {
    const double lr = lr_at(s, spe, cfg);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("adamw: one-step hand example") {
  std::vector<double> p{0.0};
  const std::vector<double> g{1.0};
  std::vector<double> m{0.0}, v{0.0};
  AdamWHyper h{0.9, 0.95, 1e-8, 0.0};
  adamw_update<double>(p, g, m, v, 1, 0.1, h, true);
  CHECK(std::abs(p[0] - (-0.1 / (1.0 + 1e-8))) < 1e-12);
}

TEST_CASE("adamw: zero gradients and pure decay") {
  std::vector<double> p{0.3, -2.0};
  const std::vector<double> g{0.0, 0.0};
  std::vector<double> m{0.0, 0.0}, v{0.0, 0.0};
  adamw_update<double>(p, g, m, v, 1, 0.1, AdamWHyper{}, true);
  CHECK(p == std::vector<double>{0.3, -2.0});
  AdamWHyper h;
  h.weight_decay = 0.05;
  adamw_update<double>(p, g, m, v, 2, 0.1, h, true);
  CHECK(p[0] == doctest::Approx(0.3 * (1 - 0.1 * 0.05)).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(-2.0 * (1 - 0.1 * 0.05)).epsilon(1e-15));
  adamw_update<double>(p, g, m, v, 3, 0.1, h, false);
  CHECK(p[0] == doctest::Approx(0.3 * (1 - 0.1 * 0.05)).epsilon(1e-15));
}

TEST_CASE("adamw: biases and mask token are not decayed") {
  ModelConfig mc = small_model(3);
  Rng rng(1);
  ModelParams<double> p = init_params<double>(mc, rng);
  for (auto& v : p.values) v = 1.0;
  const std::vector<double> zero(p.values.size(), 0.0);
  AdamWState<double> st;
  AdamWHyper h;
  h.weight_decay = 0.5;
  adamw_step<double>(p, zero, st, 0.1, h);
  for (const auto& spec : p.layout.tensors()) {
    const bool is_bias = spec.name.ends_with("bias");
    if (is_bias || spec.name == "mask_token") CHECK(!spec.decay);
    const double want = spec.decay ? 0.95 : 1.0;
    for (double v : p.tensor(&spec - p.layout.tensors().data())) CHECK(v == doctest::Approx(want));
  }
}

TEST_CASE("clip_global_norm") {
  std::vector<double> g{3.0, 4.0};
  CHECK(clip_global_norm<double>(g, 10.0) == 5.0);
  CHECK(g == std::vector<double>{3.0, 4.0});
  CHECK(clip_global_norm<double>(g, 1.0) == 5.0);
  CHECK(std::hypot(g[0], g[1]) <= 1.0 + 1e-6);
}

TEST_CASE("config json") {
  TrainConfig t;
  ModelConfig m;
  apply_config_json(R"({"epochs": 12, "betas": [0.8, 0.9], "mask_strategy": "random",
                        "model": {"embed_dim": 16, "heads": 2}})",
                    t, &m);
  CHECK(t.epochs == 12);
  CHECK(t.beta1 == 0.8);
  CHECK(t.beta2 == 0.9);
  CHECK(t.mask_strategy == MaskStrategy::kRandom);
  CHECK(m.embed_dim == 16);
  CHECK(error_kind([&] { apply_config_json(R"({"epoch": 3})", t, &m); }) == ErrorKind::kConfig);
  TrainConfig bad;
  bad.warmup_epochs = bad.epochs;
  CHECK(error_kind([&] { bad.validate(); }) == ErrorKind::kConfig);
  TrainConfig defaults;
  CHECK(defaults.epochs == 300);
  CHECK(defaults.batch_size == 128);
  CHECK(defaults.p_cm == 0.9);
  CHECK(defaults.grad_clip == 5.0);
}

TEST_CASE("train: trace length, determinism, frozen positions") {
  const auto x = linear_data(40, 4, 3);
  const Mask obs(40, 4, 1);
  const TrainConfig tc = short_run(6);
  const TrainResult a = train(x, obs, nullptr, small_model(4), tc);
  const TrainResult b = train(x, obs, nullptr, small_model(4), tc);
  CHECK(a.trace.size() == 6);
  CHECK(a.params.values == b.params.values);
  for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].mean_loss == b.trace[i].mean_loss);
  const auto p = positional_table(4, 16);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(a.params.pos_table.flat()[i] == static_cast<float>(p.flat()[i]));
}

TEST_CASE("train: post-clip norm bound at every step") {
  const auto x = linear_data(48, 5, 4);
  const Mask obs(48, 5, 1);
  TrainConfig tc = short_run(5);
  tc.grad_clip = 0.01;
  double worst = 0;
  std::size_t steps = 0;
  TrainHooks hooks;
  hooks.on_step = [&](double norm) {
    worst = std::max(worst, norm);
    ++steps;
  };
  train(x, obs, nullptr, small_model(5), tc, hooks);
  CHECK(steps == 5 * 3);  // last partial batch is kept
  CHECK(worst <= tc.grad_clip + 1e-6);
}

TEST_CASE("train: tiny overfit") {
  const auto x = linear_data(64, 4, 5);
  const Mask obs(64, 4, 1);
  TrainConfig tc = short_run(200);
  tc.warmup_epochs = 10;
  const TrainResult r = train(x, obs, nullptr, small_model(4), tc);
  CHECK(r.trace.back().mean_loss < 0.1 * r.trace.front().mean_loss);
}

TEST_CASE("train: observed-only arm halves its loss on noiseless data") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto x = linear_data(48, 4, 10 + seed);
    const Mask obs(48, 4, 1);
    TrainConfig tc = short_run(40);
    tc.seed = seed;
    tc.loss_mode = LossMode::kObserved;
    const TrainResult r = train(x, obs, nullptr, small_model(4), tc);
    CHECK(r.trace.back().mean_loss < 0.5 * r.trace.front().mean_loss);
  }
}

TEST_CASE("train: all strategy and context arms share the loop") {
  Rng rng(2);
  auto x = linear_data(30, 4, 6);
  Mask obs(30, 4, 1);
  for (std::size_t r = 0; r < 30; ++r) {
    const std::size_t c = rng.below(4);
    obs(r, c) = 0;
    x(r, c) = std::nan("");
  }
  Matrix<double> ctx(4, 6);
  for (auto& v : ctx.flat()) v = rng.normal();
  for (auto strategy : {MaskStrategy::kMtcm, MaskStrategy::kNaiveCm, MaskStrategy::kRandom}) {
    for (bool with_ctx : {false, true}) {
      ModelConfig mc = small_model(4);
      if (with_ctx) mc.ctx_raw_dim = 6;
      TrainConfig tc = short_run(3);
      tc.mask_strategy = strategy;
      std::size_t first = 0;
      TrainHooks hooks;
      hooks.on_first_batch = [&](const MaskedBatch& b) { first = b.size(); };
      const TrainResult r = train(x, obs, with_ctx ? &ctx : nullptr, mc, tc, hooks);
      CHECK(r.trace.size() == 3);
      CHECK(first == 16);
      CHECK(std::isfinite(r.trace.back().mean_loss));
    }
  }
  Mask empty_row = obs;
  for (std::size_t c = 0; c < 4; ++c) empty_row(0, c) = 0;
  CHECK(error_kind([&] { train(x, empty_row, nullptr, small_model(4), short_run(2)); }) ==
        ErrorKind::kRow);
  TrainConfig zero_ratio = short_run(2);
  zero_ratio.random_ratio = 0.0;
  CHECK(error_kind([&] { zero_ratio.validate(); }) == ErrorKind::kConfig);
}

TEST_CASE("loss trace csv") {
  const auto dir = test::temp_dir("trace");
  write_loss_trace(dir / "t.csv", {{1, 0.5, 1e-4}, {2, 0.25, 2e-4}});
  CHECK(test::read_file(dir / "t.csv") == "epoch,mean_loss,lr\n1,0.5," + format_number(1e-4) + "\n2,0.25," +
                                              format_number(2e-4) + "\n");
}
