// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training-time masks: naive copy masking, median-truncated copy masking
// (MT-CM) batch construction, and uniform random masking.
//
// Effective observability of a cell under a copy mask is always M ∧ M^cm:
// adopted copy-mask rows may carry ones where the sample itself is missing.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cacti/matrix.hpp"
#include "cacti/rng.hpp"

namespace cacti {

enum class MaskStrategy { kMtcm, kNaiveCm, kRandom };

std::string_view to_string(MaskStrategy strategy);
MaskStrategy parse_mask_strategy(std::string_view text);

struct CopyMaskConfig {
  double p_cm = 0.90;
  std::uint64_t seed = 0;
};

/// Row-permutes `observed` and lets each row adopt its permuted partner with
/// probability p_cm, provided the two rows share at least one observed cell.
Mask naive_copy_mask(const Mask& observed, double p_cm, Rng& rng);
Mask naive_copy_mask(const Mask& observed, const CopyMaskConfig& config);

/// Same as above with an explicit row permutation: row i's candidate mask is
/// row permutation[i] of `observed`. One uniform draw per row is consumed.
Mask naive_copy_mask(const Mask& observed, std::span<const std::size_t> permutation, double p_cm,
                     Rng& rng);

/// Per-batch token assignment. Encoder tokens of sample n are
/// observed_sets[n] (in order) followed by pad_counts[n] null tokens, so every
/// sample has seq_len tokens.
struct MaskedBatch {
  std::vector<std::size_t> sample_ids;
  Mask m_cm;
  std::vector<std::vector<std::size_t>> observed_sets;
  std::vector<std::vector<std::size_t>> masked_sets;
  std::vector<std::size_t> o_trunc;
  /// Lower median of the per-sample effective observed counts.
  std::size_t o_median = 0;
  std::vector<std::size_t> pad_counts;
  /// Encoder sequence length; equals o_median for MT-CM batches.
  std::size_t seq_len = 0;

  std::size_t size() const noexcept { return observed_sets.size(); }
  /// Σ pad / (B · seq_len).
  double null_fraction() const;
};

/// Lower median (order statistic ⌈B/2⌉).
std::size_t lower_median(std::vector<std::size_t> values);

/// MT-CM. `observed` and `copy_mask` are the batch's B×K rows; a fresh
/// permutation per sample decides which copy-observed columns survive
/// truncation to the batch median.
MaskedBatch mtcm_build_batch(const Mask& observed, const Mask& copy_mask, Rng& rng,
                             std::vector<std::size_t> sample_ids = {});

/// Naive copy masking without truncation: every copy-observed column is an
/// encoder token and sequences are null-padded to the batch maximum.
MaskedBatch naive_cm_build_batch(const Mask& observed, const Mask& copy_mask, Rng& rng,
                                 std::vector<std::size_t> sample_ids = {});

/// Each observed cell is masked with probability `ratio`; at least one
/// observed cell per sample stays visible. Padded to the batch maximum.
MaskedBatch random_mask(const Mask& observed, double ratio, Rng& rng,
                        std::vector<std::size_t> sample_ids = {});

/// Checks the structural invariants shared by all strategies; throws
/// ErrorKind::kInvalidBatch naming the violated property.
void validate_batch(const MaskedBatch& batch, const Mask& observed, bool median_truncated);

std::string masked_batch_json(const MaskedBatch& batch);

}  // namespace cacti
