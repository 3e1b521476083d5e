// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <sstream>

#include "cacti/checkpoint.hpp"
#include "cacti/dataset.hpp"
#include "cacti/imputation.hpp"
#include "cacti/missingness.hpp"
#include "cacti/rng.hpp"
#include "cacti/synthetic.hpp"
#include "cacti/training.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cacti;
using cacti::test::error_kind;

namespace {

struct Fixture {
  Table full;
  Table masked;
  Checkpoint ckpt;
  Matrix<double> ctx;
};

// A briefly trained context model on correlated Gaussian data with a
// categorical column, so outputs are non-trivial.
const Fixture& fixture() {
  static const Fixture f = [] {
    std::ostringstream csv;
    const Table g = gaussian_table(120, 4, 0.8, 5);
    csv << "x0,x1,x2,x3,kind\n";
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < 4; ++c) csv << format_number(g.values(r, c)) << ',';
      csv << (g.values(r, 0) > 0.3 ? "hi" : g.values(r, 0) < -0.3 ? "lo" : "mid") << '\n';
    }
    Table full = parse_csv(csv.str());
    Mask m = simulate_mcar(120, 5, 0.3, 9);
    for (std::size_t r = 0; r < 120; ++r) m(r, r % 5) = 1;  // keep every row non-empty
    Table masked = apply_mask(full, m);
    Rng rng(4);
    Matrix<double> ctx(5, 6);
    for (auto& v : ctx.flat()) v = rng.normal();
    ModelConfig mc;
    mc.features = 5;
    mc.embed_dim = 16;
    mc.heads = 2;
    mc.enc_depth = 1;
    mc.dec_depth = 1;
    mc.ctx_raw_dim = 6;
    TrainConfig tc;
    tc.epochs = 5;
    tc.warmup_epochs = 1;
    tc.batch_size = 32;
    const ScalerState sc = fit_scaler(masked);
    const Table scaled = apply_scaler(masked, sc);
    TrainResult r = train(scaled.values, scaled.observed, &ctx, mc, tc);
    Checkpoint ckpt{sc, masked.schema, std::move(r.params)};
    return Fixture{std::move(full), std::move(masked), std::move(ckpt), std::move(ctx)};
  }();
  return f;
}

}  // namespace

TEST_CASE("impute: observed cells preserved exactly, missing cells filled") {
  const auto& f = fixture();
  const Table out = impute(f.masked, f.ckpt, &f.ctx);
  for (auto v : out.observed.flat()) CHECK(v == 1);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      if (f.masked.is_observed(r, c)) {
        CHECK(out.values(r, c) == f.masked.values(r, c));
        CHECK(out.text[r * 5 + c] == f.masked.text[r * 5 + c]);
      } else {
        CHECK(std::isfinite(out.values(r, c)));
      }
    }
  }
  std::ostringstream a, b;
  write_csv(a, out, true);
  CHECK(a.str().find(",,") == std::string::npos);
}

TEST_CASE("impute: single missing cell changes only that cell") {
  const auto& f = fixture();
  Mask m(f.full.rows(), f.full.cols(), 1);
  m(7, 2) = 0;
  const Table in = apply_mask(f.full, m);
  const Table out = impute(in, f.ckpt, &f.ctx);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (i == 7 * 5 + 2) continue;
    CHECK(out.values.flat()[i] == f.full.values.flat()[i]);
  }
  CHECK(out.values(7, 2) != f.full.values(7, 2));
}

TEST_CASE("impute: batch-size independence and determinism") {
  const auto& f = fixture();
  const Table a = impute(f.masked, f.ckpt, &f.ctx, {1, false});
  const Table b = impute(f.masked, f.ckpt, &f.ctx, {256, false});
  const Table c = impute(f.masked, f.ckpt, &f.ctx, {7, false});
  CHECK(a.values == b.values);
  CHECK(a.values == c.values);
  // A row imputed alone matches the same row inside a batch.
  const Table row = select_rows(f.masked, {11});
  CHECK(impute(row, f.ckpt, &f.ctx).values.row(0)[0] == b.values(11, 0));
  const Table one = impute(row, f.ckpt, &f.ctx);
  for (std::size_t c = 0; c < 5; ++c) CHECK(one.values(0, c) == b.values(11, c));
}

TEST_CASE("impute: idempotent") {
  const auto& f = fixture();
  const Table once = impute(f.masked, f.ckpt, &f.ctx);
  const Table twice = impute(once, f.ckpt, &f.ctx);
  CHECK(twice.values == once.values);
}

TEST_CASE("impute: out-of-range test values use the train scaler") {
  const auto& f = fixture();
  Table t = select_rows(f.masked, {0, 1});
  for (std::size_t c = 0; c < 4; ++c) {
    t.values(0, c) = f.ckpt.scaler.max[c] + 5.0;
    t.observed(0, c) = 1;
  }
  t.text.clear();
  const Table out = impute(t, f.ckpt, &f.ctx);
  for (std::size_t c = 0; c < 4; ++c) CHECK(out.values(0, c) == f.ckpt.scaler.max[c] + 5.0);
  CHECK(std::isfinite(out.values(0, 4)));
}

TEST_CASE("impute: categorical rounding") {
  const auto& f = fixture();
  const Table out = impute(f.masked, f.ckpt, &f.ctx, {64, true});
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const double v = out.values(r, 4);
    CHECK(v == std::round(v));
    CHECK(v >= 0.0);
    CHECK(v <= 2.0);
  }
}

TEST_CASE("impute: empty table, row errors, schema mismatch") {
  const auto& f = fixture();
  const Table empty = select_rows(f.masked, {});
  CHECK(impute(empty, f.ckpt, &f.ctx).rows() == 0);

  Mask m(f.full.rows(), f.full.cols(), 1);
  for (std::size_t c = 0; c < 5; ++c) m(42, c) = 0;
  const Table bad = apply_mask(f.full, m);
  try {
    impute(bad, f.ckpt, &f.ctx, {16, false});
    FAIL("expected a row error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kRow);
    CHECK(std::string(e.what()).find("42") != std::string::npos);
  }
  Table renamed = f.masked;
  renamed.schema[0].name = "other";
  CHECK(error_kind([&] { impute(renamed, f.ckpt, &f.ctx); }) == ErrorKind::kCheckpoint);
}
