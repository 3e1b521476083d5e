// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include "cacti/masking.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "cacti/error.hpp"

namespace cacti {
namespace {

std::size_t row_count(const Mask& m, std::size_t r) {
  std::size_t s = 0;
  for (auto v : m.row(r)) s += v != 0;
  return s;
}

void check_aligned(const Mask& observed, const Mask& copy_mask) {
  require(observed.rows() == copy_mask.rows() && observed.cols() == copy_mask.cols(),
          ErrorKind::kShape, "observed and copy masks differ in shape");
  require(observed.rows() > 0, ErrorKind::kInvalidBatch, "empty batch");
}

std::vector<std::size_t> default_ids(std::vector<std::size_t> ids, std::size_t b) {
  if (ids.empty()) {
    ids.resize(b);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
  }
  require(ids.size() == b, ErrorKind::kShape, "sample id count does not match batch size");
  return ids;
}

MaskedBatch copy_mask_batch(const Mask& observed, const Mask& copy_mask, Rng& rng,
                            std::vector<std::size_t> sample_ids, bool truncate) {
  check_aligned(observed, copy_mask);
  const std::size_t b = observed.rows();
  const std::size_t k = observed.cols();

  MaskedBatch batch;
  batch.sample_ids = default_ids(std::move(sample_ids), b);
  batch.m_cm = copy_mask;

  std::vector<std::size_t> counts(b, 0);
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t c = 0; c < k; ++c) counts[n] += observed(n, c) && copy_mask(n, c);
    require(counts[n] >= 1, ErrorKind::kInvalidBatch,
            "sample " + std::to_string(batch.sample_ids[n]) + " has no copy-observed feature");
  }
  batch.o_median = lower_median(counts);
  const std::size_t limit =
      truncate ? batch.o_median : *std::max_element(counts.begin(), counts.end());
  batch.seq_len = limit;

  batch.observed_sets.resize(b);
  batch.masked_sets.resize(b);
  batch.o_trunc.resize(b);
  batch.pad_counts.resize(b);
  for (std::size_t n = 0; n < b; ++n) {
    const std::size_t trunc = std::min(counts[n], limit);
    const auto perm = rng.permutation(k);
    auto& obs = batch.observed_sets[n];
    auto& msk = batch.masked_sets[n];
    obs.reserve(trunc);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t c = perm[j];
      if (observed(n, c) && copy_mask(n, c) && obs.size() < trunc) {
        obs.push_back(c);
      } else if (observed(n, c)) {
        msk.push_back(c);
      }
    }
    std::sort(msk.begin(), msk.end());
    batch.o_trunc[n] = trunc;
    batch.pad_counts[n] = limit - trunc;
  }
  return batch;
}

}  // namespace

std::string_view to_string(MaskStrategy strategy) {
  switch (strategy) {
    case MaskStrategy::kMtcm: return "mtcm";
    case MaskStrategy::kNaiveCm: return "naive_cm";
    case MaskStrategy::kRandom: return "random";
  }
  return "mtcm";
}

MaskStrategy parse_mask_strategy(std::string_view text) {
  if (text == "mtcm") return MaskStrategy::kMtcm;
  if (text == "naive_cm" || text == "naive-cm" || text == "cm") return MaskStrategy::kNaiveCm;
  if (text == "random") return MaskStrategy::kRandom;
  fail(ErrorKind::kInvalidArgument, "unknown mask strategy '" + std::string(text) + "'");
}

double MaskedBatch::null_fraction() const {
  if (observed_sets.empty() || seq_len == 0) return 0.0;
  const std::size_t pads = std::accumulate(pad_counts.begin(), pad_counts.end(), std::size_t{0});
  return static_cast<double>(pads) / static_cast<double>(observed_sets.size() * seq_len);
}

std::size_t lower_median(std::vector<std::size_t> values) {
  require(!values.empty(), ErrorKind::kInvalidBatch, "median of an empty batch");
  const std::size_t idx = (values.size() + 1) / 2 - 1;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(idx), values.end());
  return values[idx];
}

Mask naive_copy_mask(const Mask& observed, std::span<const std::size_t> permutation, double p_cm,
                     Rng& rng) {
  require(p_cm >= 0.0 && p_cm <= 1.0, ErrorKind::kInvalidArgument, "p_cm must lie in [0, 1]");
  const std::size_t n = observed.rows();
  const std::size_t k = observed.cols();
  require(permutation.size() == n, ErrorKind::kShape, "permutation length differs from row count");
  for (std::size_t r = 0; r < n; ++r) {
    require(row_count(observed, r) >= 1, ErrorKind::kInvalidInput,
            "row " + std::to_string(r) + " has no observed feature");
  }
  Mask cm = observed;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const auto candidate = observed.row(permutation[i]);
    std::size_t shared = 0;
    for (std::size_t c = 0; c < k; ++c) shared += cm(i, c) * candidate[c];
    if (u < p_cm && shared >= 1) std::copy(candidate.begin(), candidate.end(), cm.row(i).begin());
  }
  return cm;
}

Mask naive_copy_mask(const Mask& observed, double p_cm, Rng& rng) {
  const auto perm = rng.permutation(observed.rows());
  return naive_copy_mask(observed, perm, p_cm, rng);
}

Mask naive_copy_mask(const Mask& observed, const CopyMaskConfig& config) {
  Rng rng(config.seed);
  return naive_copy_mask(observed, config.p_cm, rng);
}

MaskedBatch mtcm_build_batch(const Mask& observed, const Mask& copy_mask, Rng& rng,
                             std::vector<std::size_t> sample_ids) {
  return copy_mask_batch(observed, copy_mask, rng, std::move(sample_ids), true);
}

MaskedBatch naive_cm_build_batch(const Mask& observed, const Mask& copy_mask, Rng& rng,
                                 std::vector<std::size_t> sample_ids) {
  return copy_mask_batch(observed, copy_mask, rng, std::move(sample_ids), false);
}

MaskedBatch random_mask(const Mask& observed, double ratio, Rng& rng,
                        std::vector<std::size_t> sample_ids) {
  require(ratio > 0.0 && ratio < 1.0, ErrorKind::kInvalidArgument,
          "random mask ratio must lie in (0, 1)");
  const std::size_t b = observed.rows();
  const std::size_t k = observed.cols();
  require(b > 0, ErrorKind::kInvalidBatch, "empty batch");

  MaskedBatch batch;
  batch.sample_ids = default_ids(std::move(sample_ids), b);
  batch.m_cm = Mask(b, k, 0);
  batch.observed_sets.resize(b);
  batch.masked_sets.resize(b);
  std::vector<std::size_t> counts(b);
  for (std::size_t n = 0; n < b; ++n) {
    auto& obs = batch.observed_sets[n];
    auto& msk = batch.masked_sets[n];
    std::vector<std::size_t> avail;
    for (std::size_t c = 0; c < k; ++c) {
      if (!observed(n, c)) continue;
      avail.push_back(c);
      (rng.uniform() < ratio ? msk : obs).push_back(c);
    }
    require(!avail.empty(), ErrorKind::kInvalidBatch,
            "sample " + std::to_string(batch.sample_ids[n]) + " has no observed feature");
    if (obs.empty()) {
      const std::size_t keep = avail[rng.below(avail.size())];
      obs.push_back(keep);
      msk.erase(std::find(msk.begin(), msk.end(), keep));
    }
    for (auto c : obs) batch.m_cm(n, c) = 1;
    counts[n] = obs.size();
  }
  batch.o_trunc = counts;
  batch.o_median = lower_median(counts);
  batch.seq_len = *std::max_element(counts.begin(), counts.end());
  batch.pad_counts.resize(b);
  for (std::size_t n = 0; n < b; ++n) batch.pad_counts[n] = batch.seq_len - counts[n];
  return batch;
}

void validate_batch(const MaskedBatch& batch, const Mask& observed, bool median_truncated) {
  const std::size_t b = batch.size();
  require(b == observed.rows() && b > 0, ErrorKind::kInvalidBatch, "batch size mismatch");
  require(batch.masked_sets.size() == b && batch.o_trunc.size() == b &&
              batch.pad_counts.size() == b,
          ErrorKind::kInvalidBatch, "ragged batch fields");
  const std::size_t k = observed.cols();
  for (std::size_t n = 0; n < b; ++n) {
    const auto& obs = batch.observed_sets[n];
    const auto& msk = batch.masked_sets[n];
    const std::string who = "sample " + std::to_string(n) + ": ";
    require(!obs.empty(), ErrorKind::kInvalidBatch, who + "empty observed set");
    require(obs.size() == batch.o_trunc[n], ErrorKind::kInvalidBatch, who + "|O| != o_trunc");
    require(obs.size() + batch.pad_counts[n] == batch.seq_len, ErrorKind::kInvalidBatch,
            who + "|O| + pad != sequence length");
    if (median_truncated) {
      require(batch.seq_len == batch.o_median, ErrorKind::kInvalidBatch,
              who + "sequence length != o_median");
    }
    std::vector<std::uint8_t> seen(k, 0);
    for (auto c : obs) {
      require(c < k && observed(n, c), ErrorKind::kInvalidBatch,
              who + "observed set holds a missing column");
      require(!seen[c], ErrorKind::kInvalidBatch, who + "duplicate column");
      seen[c] = 1;
    }
    for (auto c : msk) {
      require(c < k && observed(n, c), ErrorKind::kInvalidBatch,
              who + "masked set holds a missing column");
      require(!seen[c], ErrorKind::kInvalidBatch, who + "observed and masked sets overlap");
      seen[c] = 1;
    }
  }
  if (median_truncated) {
    require(batch.null_fraction() <= 0.5, ErrorKind::kInvalidBatch, "null fraction above 0.5");
  }
}

std::string masked_batch_json(const MaskedBatch& batch) {
  nlohmann::json j;
  j["sample_ids"] = batch.sample_ids;
  j["observed_sets"] = batch.observed_sets;
  j["masked_sets"] = batch.masked_sets;
  j["o_trunc"] = batch.o_trunc;
  j["o_median"] = batch.o_median;
  j["pad_counts"] = batch.pad_counts;
  j["seq_len"] = batch.seq_len;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < batch.m_cm.rows(); ++r) {
    std::vector<int> row(batch.m_cm.row(r).begin(), batch.m_cm.row(r).end());
    rows.push_back(row);
  }
  j["m_cm"] = rows;
  return j.dump();
}

}  // namespace cacti
