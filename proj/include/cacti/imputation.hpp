// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Inference: the encoder sees exactly each row's observed features, the
// decoder fills the rest, and only missing cells take the model output.

#pragma once

#include "cacti/checkpoint.hpp"
#include "cacti/dataset.hpp"
#include "cacti/matrix.hpp"

namespace cacti {

struct ImputeOptions {
  std::size_t batch_size = 256;
  /// Snap categorical imputations to the nearest valid code.
  bool round_categorical = false;
};

/// Imputes `table` (original scale). Observed cells, including their
/// original text tokens, are copied through unchanged; the result is fully
/// observed. `ctx` is the K×ctx_raw_dim context matrix for context models.
///
/// Each row is encoded as its own sequence (no padding tokens), so results
/// do not depend on the batch size or on the other rows in a batch.
Table impute(const Table& table, const Checkpoint& ckpt, const Matrix<double>* ctx,
             const ImputeOptions& options = {});

/// Raw scaled-space model outputs (N×K) for every cell.
Matrix<double> predict_scaled(const Matrix<double>& scaled, const Mask& observed,
                              const ModelParams<float>& params, const Matrix<double>* ctx,
                              std::size_t batch_size = 256);

}  // namespace cacti
