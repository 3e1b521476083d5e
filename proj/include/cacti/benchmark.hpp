// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Benchmark grid: split → simulate → train → impute → evaluate for every
// mechanism × p_miss × method × seed, reporting train (in-sample) and test
// (out-of-sample) scores separately.
//
// Methods map to (mask strategy, context):
//   cacti = (mtcm, ctx)   cmae = (mtcm, none)   rmae = (random, none)
//   rmae_ctx = (random, ctx)   cacti_naive = (naive_cm, ctx)
//   mean = column-mean baseline

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cacti/dataset.hpp"
#include "cacti/metrics.hpp"
#include "cacti/missingness.hpp"
#include "cacti/model.hpp"
#include "cacti/training.hpp"

namespace cacti {

struct SyntheticSpec {
  std::size_t rows = 2000;
  std::size_t cols = 8;
  double rho = 0.9;
  /// Width of the random per-column context vectors used by context methods.
  std::size_t context_dim = 16;
};

struct BenchmarkConfig {
  /// Fully observed CSV; the synthetic table is used when unset.
  std::optional<std::string> data;
  std::optional<std::string> schema_hint;
  std::optional<std::string> context;
  SyntheticSpec synthetic;
  std::vector<Mechanism> mechanisms{Mechanism::kMCAR};
  std::vector<double> p_miss{0.3};
  double p_obs = 0.3;
  std::vector<std::string> methods{"cacti", "cmae", "rmae", "rmae_ctx", "mean"};
  std::size_t seeds = 1;
  std::uint64_t root_seed = 0;
  double test_fraction = 0.2;
  RmseScale scale = RmseScale::kStandardized;
  ModelConfig model;  // `features` and `ctx_raw_dim` are filled per dataset
  TrainConfig train;  // `seed`, `mask_strategy` are set per run
};

/// Parses the benchmark JSON. `"preset": "ablation"` selects the four
/// backbone arms (rmae, rmae_ctx, cmae, cacti). Relative paths resolve
/// against `base_dir`.
BenchmarkConfig parse_benchmark_config(std::string_view json_text,
                                       const std::string& base_dir = ".");

struct RunResult {
  Mechanism mechanism = Mechanism::kMCAR;
  double p_miss = 0.0;
  std::string method;
  std::size_t seed_index = 0;
  std::uint64_t run_seed = 0;
  std::string split;  // "train" or "test"
  double r2 = 0.0;
  double rmse = 0.0;
  double wd = 0.0;
  std::size_t n_eval = 0;
  /// Rows with no visible feature; models cannot encode them, so they take
  /// the training column means (and are left out of model training).
  std::size_t fallback_rows = 0;
};

struct AggregateRow {
  Mechanism mechanism = Mechanism::kMCAR;
  double p_miss = 0.0;
  std::string method;
  std::string split;
  std::size_t runs = 0;
  double r2_mean = 0.0, r2_std = 0.0;
  double rmse_mean = 0.0, rmse_std = 0.0;
  double wd_mean = 0.0, wd_std = 0.0;
};

struct BenchmarkReport {
  std::vector<RunResult> runs;
  std::vector<AggregateRow> aggregates;
};

/// `workers` caps how many grid cells run concurrently (0 = read
/// CACTI_THREADS, default 1). Results do not depend on it.
BenchmarkReport run_benchmark(const BenchmarkConfig& config, std::size_t workers = 0);

std::string benchmark_to_json(const BenchmarkConfig& config, const BenchmarkReport& report);
std::string benchmark_to_text(const BenchmarkReport& report);

}  // namespace cacti
