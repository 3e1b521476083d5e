// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Missingness simulators (MCAR / logistic MAR / logistic-plus-Bernoulli MNAR)
// and mask application.

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "cacti/dataset.hpp"
#include "cacti/matrix.hpp"

namespace cacti {

enum class Mechanism { kMCAR, kMAR, kMNAR };

std::string_view to_string(Mechanism mechanism);
Mechanism parse_mechanism(std::string_view text);

struct SimConfig {
  Mechanism mechanism = Mechanism::kMCAR;
  double p_miss = 0.3;
  /// Fraction of always-observed (conditioning) columns; MAR/MNAR only.
  double p_obs = 0.3;
  std::uint64_t seed = 0;
};

struct SimResult {
  Mask mask;  // 1 = observed
  /// Conditioning columns of MAR/MNAR, ascending; empty for MCAR.
  std::vector<std::size_t> observed_columns;
  /// Missing fraction over all cells.
  double realized_rate = 0.0;
  /// Missing fraction over the columns the logistic model masks (MAR/MNAR),
  /// equal to realized_rate for MCAR.
  double maskable_rate = 0.0;
};

Mask simulate_mcar(std::size_t rows, std::size_t cols, double p_miss, std::uint64_t seed);
SimResult simulate_mar(const Matrix<double>& x, double p_miss, double p_obs, std::uint64_t seed);
SimResult simulate_mnar(const Matrix<double>& x, double p_miss, double p_obs, std::uint64_t seed);

/// Dispatches on `config.mechanism`; `x` must be fully observed.
SimResult simulate(const Matrix<double>& x, const SimConfig& config);

/// Fraction of zero cells.
double missing_rate(const Mask& mask);

/// Hides cells where `mask` is 0. `mask` may only hide observed cells.
Table apply_mask(const Table& table, const Mask& mask);

}  // namespace cacti
