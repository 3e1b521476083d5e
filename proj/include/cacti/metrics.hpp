// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Imputation quality at held-out cells: per-column squared Pearson
// correlation, pooled RMSE on three scales, 1-D Wasserstein distance, the
// mean-imputation baseline and a one-sided paired t-test.
//
// Every function takes an `eval` mask whose 1-cells are the positions to
// score (truth known, value hidden from the imputer). No other cell of
// `imputed` is read.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cacti/dataset.hpp"
#include "cacti/matrix.hpp"

namespace cacti {

enum class RmseScale { kStandardized, kOriginal, kMinMax };

std::string_view to_string(RmseScale scale);
RmseScale parse_rmse_scale(std::string_view text);

/// Columns need at least this many eval cells to enter an aggregate.
inline constexpr std::size_t kMinEvalPerColumn = 2;

struct R2Result {
  std::vector<double> per_column;  // NaN where n_eval < kMinEvalPerColumn
  double mean = 0.0;
};

/// Squared Pearson correlation per column, 0 when either side is constant.
R2Result r_squared(const Matrix<double>& truth, const Matrix<double>& imputed, const Mask& eval);

/// Pooled RMSE over all eval cells after a per-column transform: residuals
/// are divided by the full truth column's standard deviation (standardized),
/// left alone (original), or divided by the scaler's range (minmax, needs
/// `scaler`). Standardized drops zero-std columns and reports them in
/// `skipped` when given.
double rmse(const Matrix<double>& truth, const Matrix<double>& imputed, const Mask& eval,
            RmseScale scale, const ScalerState* scaler = nullptr,
            std::vector<std::size_t>* skipped = nullptr);

/// Exact W1 between two empirical distributions via their quantile functions.
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

/// Missing cells get their column's observed mean (categorical codes stay
/// unrounded). Fully missing columns are an error.
Table mean_impute(const Table& table);

struct TTestResult {
  double t = 0.0;
  double p = 0.0;
  std::size_t dof = 0;
};

/// H1: mean(a − b) > 0. Upper-tail p-value from Student's t with n−1 dof.
TTestResult paired_t_test_one_sided(std::span<const double> a, std::span<const double> b);

struct ColumnMetrics {
  std::string name;
  std::size_t n_eval = 0;
  double r2 = 0.0;
  double rmse = 0.0;  // on the report's scale
  double wd = 0.0;
};

struct MetricsReport {
  RmseScale scale = RmseScale::kStandardized;
  std::vector<ColumnMetrics> columns;
  double r2_mean = 0.0;
  double rmse = 0.0;  // pooled, on `scale`
  double rmse_standardized = 0.0;
  double rmse_original = 0.0;
  std::optional<double> rmse_minmax;
  double wd_mean = 0.0;
  std::size_t n_eval = 0;
  std::vector<std::string> warnings;
};

/// Full report over eligible columns (n_eval ≥ kMinEvalPerColumn).
MetricsReport evaluate(const Table& truth, const Matrix<double>& imputed, const Mask& eval,
                       RmseScale scale = RmseScale::kStandardized,
                       const ScalerState* scaler = nullptr);

std::string report_to_json(const MetricsReport& report);
std::string report_to_text(const MetricsReport& report);

}  // namespace cacti
