// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include "cacti/missingness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cacti/error.hpp"
#include "cacti/rng.hpp"

namespace cacti {
namespace {

constexpr double kInterceptLo = -50.0;
constexpr double kInterceptHi = 50.0;
constexpr int kBisectionIters = 100;
constexpr double kInterceptTol = 1e-4;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_rate(double p, std::string_view what) {
  require(p > 0.0 && p < 1.0, ErrorKind::kInvalidArgument,
          std::string(what) + " must lie in (0, 1)");
}

// Mean of sigmoid(logit + b) over rows.
double mean_prob(const std::vector<double>& logits, double b) {
  double s = 0.0;
  for (double l : logits) s += sigmoid(l + b);
  return s / static_cast<double>(logits.size());
}

double fit_intercept(const std::vector<double>& logits, double target) {
  double lo = kInterceptLo;
  double hi = kInterceptHi;
  double mid = 0.0;
  for (int it = 0; it < kBisectionIters; ++it) {
    mid = 0.5 * (lo + hi);
    if (mean_prob(logits, mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (std::abs(mean_prob(logits, mid) - target) > kInterceptTol) {
    fail(ErrorKind::kSimulator, "intercept bisection did not converge");
  }
  return mid;
}

// Logistic masking of the non-conditioning columns. Returns the mask and the
// set of conditioning columns; consumes `rng` in a fixed order.
SimResult logistic_mask(const Matrix<double>& x, double p_miss, double p_obs, Rng& rng) {
  check_rate(p_miss, "p_miss");
  check_rate(p_obs, "p_obs");
  const std::size_t n = x.rows();
  const std::size_t k = x.cols();
  require(k >= 2, ErrorKind::kInvalidArgument, "MAR/MNAR need at least 2 columns");
  require(n >= 1, ErrorKind::kInvalidArgument, "MAR/MNAR need at least 1 row");
  for (double v : x.flat()) {
    require(std::isfinite(v), ErrorKind::kInvalidArgument, "MAR/MNAR need fully observed data");
  }

  const std::size_t d_obs =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(p_obs * static_cast<double>(k))));
  require(d_obs < k, ErrorKind::kInvalidArgument, "p_obs leaves no maskable column");

  auto perm = rng.permutation(k);
  std::vector<std::size_t> cond(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(d_obs));
  std::sort(cond.begin(), cond.end());
  std::vector<std::uint8_t> is_cond(k, 0);
  for (auto c : cond) is_cond[c] = 1;

  // z-scored conditioning features; constant columns contribute 0.
  Matrix<double> z(n, d_obs, 0.0);
  for (std::size_t j = 0; j < d_obs; ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += x(r, cond[j]);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (x(r, cond[j]) - mean) * (x(r, cond[j]) - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (sd > 0.0) {
      for (std::size_t r = 0; r < n; ++r) z(r, j) = (x(r, cond[j]) - mean) / sd;
    }
  }

  SimResult out;
  out.mask = Mask(n, k, 1);
  out.observed_columns = cond;
  std::vector<double> logits(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (is_cond[c]) continue;
    std::vector<double> w(d_obs);
    for (auto& wi : w) wi = rng.normal();
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double l = 0.0;
      for (std::size_t j = 0; j < d_obs; ++j) l += z(r, j) * w[j];
      logits[r] = l;
      mean += l;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double l : logits) var += (l - mean) * (l - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (sd > 0.0) {
      for (double& l : logits) l /= sd;
    }
    const double b = fit_intercept(logits, p_miss);
    for (std::size_t r = 0; r < n; ++r) {
      if (rng.uniform() < sigmoid(logits[r] + b)) out.mask(r, c) = 0;
    }
  }
  return out;
}

void fill_rates(SimResult& result) {
  result.realized_rate = missing_rate(result.mask);
  const std::size_t n = result.mask.rows();
  const std::size_t k = result.mask.cols();
  std::vector<std::uint8_t> is_cond(k, 0);
  for (auto c : result.observed_columns) is_cond[c] = 1;
  std::size_t missing = 0;
  std::size_t cells = 0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      if (is_cond[c]) continue;
      ++cells;
      missing += result.mask(r, c) == 0;
    }
  }
  result.maskable_rate = cells ? static_cast<double>(missing) / static_cast<double>(cells) : 0.0;
}

}  // namespace

std::string_view to_string(Mechanism mechanism) {
  switch (mechanism) {
    case Mechanism::kMCAR: return "mcar";
    case Mechanism::kMAR: return "mar";
    case Mechanism::kMNAR: return "mnar";
  }
  return "mcar";
}

Mechanism parse_mechanism(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "mcar") return Mechanism::kMCAR;
  if (lower == "mar") return Mechanism::kMAR;
  if (lower == "mnar") return Mechanism::kMNAR;
  fail(ErrorKind::kInvalidArgument, "unknown mechanism '" + std::string(text) + "'");
}

double missing_rate(const Mask& mask) {
  if (mask.size() == 0) return 0.0;
  const auto zeros = std::count(mask.flat().begin(), mask.flat().end(), std::uint8_t{0});
  return static_cast<double>(zeros) / static_cast<double>(mask.size());
}

Mask simulate_mcar(std::size_t rows, std::size_t cols, double p_miss, std::uint64_t seed) {
  check_rate(p_miss, "p_miss");
  Rng rng(seed);
  Mask mask(rows, cols, 1);
  for (auto& cell : mask.flat()) cell = rng.uniform() < p_miss ? 0 : 1;
  return mask;
}

SimResult simulate_mar(const Matrix<double>& x, double p_miss, double p_obs, std::uint64_t seed) {
  Rng rng(seed);
  SimResult out = logistic_mask(x, p_miss, p_obs, rng);
  fill_rates(out);
  return out;
}

SimResult simulate_mnar(const Matrix<double>& x, double p_miss, double p_obs,
                        std::uint64_t seed) {
  Rng rng(seed);
  SimResult out = logistic_mask(x, p_miss, p_obs, rng);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (auto c : out.observed_columns) {
      if (rng.uniform() < p_miss) out.mask(r, c) = 0;
    }
  }
  fill_rates(out);
  return out;
}

SimResult simulate(const Matrix<double>& x, const SimConfig& config) {
  switch (config.mechanism) {
    case Mechanism::kMCAR: {
      SimResult out;
      out.mask = simulate_mcar(x.rows(), x.cols(), config.p_miss, config.seed);
      fill_rates(out);
      return out;
    }
    case Mechanism::kMAR: return simulate_mar(x, config.p_miss, config.p_obs, config.seed);
    case Mechanism::kMNAR: return simulate_mnar(x, config.p_miss, config.p_obs, config.seed);
  }
  fail(ErrorKind::kInvalidArgument, "unknown mechanism");
}

Table apply_mask(const Table& table, const Mask& mask) {
  require(mask.rows() == table.rows() && mask.cols() == table.cols(), ErrorKind::kShape,
          "mask is " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()) +
              ", table is " + std::to_string(table.rows()) + "x" + std::to_string(table.cols()));
  Table out = table;
  const bool have_text = out.text.size() == out.rows() * out.cols();
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.cols(); ++c) {
      if (mask(r, c) == 0) {
        out.observed(r, c) = 0;
        out.values(r, c) = std::numeric_limits<double>::quiet_NaN();
        if (have_text) out.text[r * out.cols() + c].clear();
      } else if (!table.is_observed(r, c)) {
        fail(ErrorKind::kInvalidMask, "mask marks cell (" + std::to_string(r) + "," +
                                          std::to_string(c) + ") observed but it is missing");
      }
    }
  }
  return out;
}

}  // namespace cacti
