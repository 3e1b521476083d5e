// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic equicorrelated Gaussian tables for tests and benchmarks.

#pragma once

#include <cstdint>

#include "cacti/dataset.hpp"

namespace cacti {

/// N×K fully observed continuous table with unit-variance columns named
/// x0..x{K-1} and pairwise correlation `rho` (0 ≤ rho < 1):
/// x_k = √ρ·z_0 + √(1−ρ)·z_k.
Table gaussian_table(std::size_t rows, std::size_t cols, double rho, std::uint64_t seed);

}  // namespace cacti
