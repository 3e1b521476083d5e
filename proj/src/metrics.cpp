// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include "cacti/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "cacti/error.hpp"
#include "json.hpp"

namespace cacti {
namespace {

void check_shapes(const Matrix<double>& truth, const Matrix<double>& imputed, const Mask& eval) {
  require(truth.rows() == imputed.rows() && truth.cols() == imputed.cols(), ErrorKind::kShape,
          "truth is " + std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()) +
              ", imputed is " + std::to_string(imputed.rows()) + "x" +
              std::to_string(imputed.cols()));
  require(eval.rows() == truth.rows() && eval.cols() == truth.cols(), ErrorKind::kShape,
          "eval mask shape differs from truth");
}

std::size_t column_count(const Mask& eval, std::size_t c) {
  std::size_t n = 0;
  for (std::size_t r = 0; r < eval.rows(); ++r) n += eval(r, c) != 0;
  return n;
}

double column_std(const Matrix<double>& truth, std::size_t c) {
  double sum = 0.0;
  std::size_t n = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t r = 0; r < truth.rows(); ++r) {
    if (std::isfinite(truth(r, c))) {
      sum += truth(r, c);
      lo = std::min(lo, truth(r, c));
      hi = std::max(hi, truth(r, c));
      ++n;
    }
  }
  if (n == 0 || lo == hi) return 0.0;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t r = 0; r < truth.rows(); ++r) {
    if (std::isfinite(truth(r, c))) ss += (truth(r, c) - mean) * (truth(r, c) - mean);
  }
  return std::sqrt(ss / static_cast<double>(n));
}

double column_r2(const Matrix<double>& truth, const Matrix<double>& imputed, const Mask& eval,
                 std::size_t c) {
  double st = 0, si = 0;
  std::size_t n = 0;
  // Constancy is tested on the values themselves: a centered sum of squares
  // can come out as a tiny positive number for an exactly constant side.
  bool t_const = true, i_const = true;
  double t0 = 0, i0 = 0;
  for (std::size_t r = 0; r < truth.rows(); ++r) {
    if (!eval(r, c)) continue;
    if (n == 0) {
      t0 = truth(r, c);
      i0 = imputed(r, c);
    }
    t_const = t_const && truth(r, c) == t0;
    i_const = i_const && imputed(r, c) == i0;
    st += truth(r, c);
    si += imputed(r, c);
    ++n;
  }
  if (t_const || i_const) return 0.0;
  const double mt = st / static_cast<double>(n);
  const double mi = si / static_cast<double>(n);
  double stt = 0, sii = 0, sti = 0;
  for (std::size_t r = 0; r < truth.rows(); ++r) {
    if (!eval(r, c)) continue;
    const double dt = truth(r, c) - mt;
    const double di = imputed(r, c) - mi;
    stt += dt * dt;
    sii += di * di;
    sti += dt * di;
  }
  if (stt <= 0.0 || sii <= 0.0) return 0.0;
  return std::clamp(sti * sti / (stt * sii), 0.0, 1.0);
}

Mask eligible_only(const Mask& eval) {
  Mask out = eval;
  for (std::size_t c = 0; c < eval.cols(); ++c) {
    if (column_count(eval, c) >= kMinEvalPerColumn) continue;
    for (std::size_t r = 0; r < eval.rows(); ++r) out(r, c) = 0;
  }
  return out;
}

}  // namespace

std::string_view to_string(RmseScale scale) {
  switch (scale) {
    case RmseScale::kStandardized: return "standardized";
    case RmseScale::kOriginal: return "original";
    case RmseScale::kMinMax: return "minmax";
  }
  return "standardized";
}

RmseScale parse_rmse_scale(std::string_view text) {
  if (text == "standardized") return RmseScale::kStandardized;
  if (text == "original") return RmseScale::kOriginal;
  if (text == "minmax") return RmseScale::kMinMax;
  fail(ErrorKind::kInvalidArgument, "unknown metrics scale '" + std::string(text) + "'");
}

R2Result r_squared(const Matrix<double>& truth, const Matrix<double>& imputed, const Mask& eval) {
  check_shapes(truth, imputed, eval);
  R2Result out;
  out.per_column.assign(truth.cols(), std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  std::size_t eligible = 0;
  for (std::size_t c = 0; c < truth.cols(); ++c) {
    if (column_count(eval, c) < kMinEvalPerColumn) continue;
    out.per_column[c] = column_r2(truth, imputed, eval, c);
    sum += out.per_column[c];
    ++eligible;
  }
  require(eligible > 0, ErrorKind::kMetric, "no column has at least 2 eval cells");
  out.mean = sum / static_cast<double>(eligible);
  return out;
}

double rmse(const Matrix<double>& truth, const Matrix<double>& imputed, const Mask& eval,
            RmseScale scale, const ScalerState* scaler, std::vector<std::size_t>* skipped) {
  check_shapes(truth, imputed, eval);
  if (scale == RmseScale::kMinMax) {
    require(scaler != nullptr && scaler->cols() == truth.cols(), ErrorKind::kMetric,
            "minmax RMSE needs the training scaler");
  }
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < truth.cols(); ++c) {
    double div = 1.0;
    if (scale == RmseScale::kStandardized) {
      div = column_std(truth, c);
      if (div <= 0.0) {
        if (skipped != nullptr && column_count(eval, c) > 0) skipped->push_back(c);
        continue;
      }
    } else if (scale == RmseScale::kMinMax) {
      div = scaler->max[c] - scaler->min[c];
      if (div <= 0.0) div = 1.0;
    }
    for (std::size_t r = 0; r < truth.rows(); ++r) {
      if (!eval(r, c)) continue;
      const double e = (imputed(r, c) - truth(r, c)) / div;
      ss += e * e;
      ++n;
    }
  }
  require(n > 0, ErrorKind::kMetric, "no eval cells to score");
  return std::sqrt(ss / static_cast<double>(n));
}

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), ErrorKind::kInvalidArgument,
          "Wasserstein distance needs two non-empty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  // Walk the merged breakpoints i/n and j/m of the two quantile functions.
  std::size_t i = 0, j = 0;
  double u = 0.0, total = 0.0;
  while (i < x.size() && j < y.size()) {
    const double next_a = static_cast<double>(i + 1) / n;
    const double next_b = static_cast<double>(j + 1) / m;
    const double next = std::min(next_a, next_b);
    total += (next - u) * std::abs(x[i] - y[j]);
    u = next;
    // Compare (i+1)/n with (j+1)/m in integers so ties advance both sides.
    const auto lhs = static_cast<unsigned long long>(i + 1) * y.size();
    const auto rhs = static_cast<unsigned long long>(j + 1) * x.size();
    if (lhs <= rhs) ++i;
    if (rhs <= lhs) ++j;
  }
  return total;
}

Table mean_impute(const Table& table) {
  Table out = table;
  for (std::size_t c = 0; c < table.cols(); ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < table.rows(); ++r) {
      if (table.is_observed(r, c)) {
        sum += table.values(r, c);
        ++n;
      }
    }
    if (n == table.rows()) continue;
    require(n > 0, ErrorKind::kInvalidInput,
            "column '" + table.schema[c].name + "' is fully missing");
    const double mean = sum / static_cast<double>(n);
    for (std::size_t r = 0; r < table.rows(); ++r) {
      if (table.is_observed(r, c)) continue;
      out.values(r, c) = mean;
      out.observed(r, c) = 1;
    }
  }
  return out;
}

TTestResult paired_t_test_one_sided(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::kInvalidArgument, "paired samples differ in length");
  require(a.size() >= 2, ErrorKind::kInvalidArgument, "paired t-test needs at least 2 pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  require(sd > 0.0, ErrorKind::kDegenerateTest, "paired differences have zero variance");
  TTestResult r;
  r.dof = n - 1;
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(r.dof));
  r.p = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

MetricsReport evaluate(const Table& truth, const Matrix<double>& imputed, const Mask& eval,
                       RmseScale scale, const ScalerState* scaler) {
  check_shapes(truth.values, imputed, eval);
  for (std::size_t r = 0; r < eval.rows(); ++r) {
    for (std::size_t c = 0; c < eval.cols(); ++c) {
      if (!eval(r, c)) continue;
      require(truth.is_observed(r, c), ErrorKind::kMetric,
              "eval cell (" + std::to_string(r) + "," + std::to_string(c) + ") has no truth");
      require(std::isfinite(imputed(r, c)), ErrorKind::kMetric,
              "imputed cell (" + std::to_string(r) + "," + std::to_string(c) + ") is empty");
    }
  }
  MetricsReport rep;
  rep.scale = scale;
  const Mask elig = eligible_only(eval);
  const R2Result r2 = r_squared(truth.values, imputed, eval);
  rep.r2_mean = r2.mean;

  std::vector<std::size_t> skipped;
  rep.rmse_standardized =
      rmse(truth.values, imputed, elig, RmseScale::kStandardized, nullptr, &skipped);
  for (auto c : skipped) {
    rep.warnings.push_back("column '" + truth.schema[c].name +
                           "' has zero std; skipped in standardized RMSE");
  }
  rep.rmse_original = rmse(truth.values, imputed, elig, RmseScale::kOriginal);
  if (scaler != nullptr) {
    rep.rmse_minmax = rmse(truth.values, imputed, elig, RmseScale::kMinMax, scaler);
  }
  switch (scale) {
    case RmseScale::kStandardized: rep.rmse = rep.rmse_standardized; break;
    case RmseScale::kOriginal: rep.rmse = rep.rmse_original; break;
    case RmseScale::kMinMax:
      require(rep.rmse_minmax.has_value(), ErrorKind::kMetric,
              "minmax RMSE needs the training scaler");
      rep.rmse = *rep.rmse_minmax;
      break;
  }

  double wd_sum = 0.0;
  std::size_t eligible = 0;
  for (std::size_t c = 0; c < truth.cols(); ++c) {
    ColumnMetrics cm;
    cm.name = truth.schema[c].name;
    cm.n_eval = column_count(eval, c);
    rep.n_eval += cm.n_eval;
    if (cm.n_eval >= kMinEvalPerColumn) {
      Mask one(eval.rows(), eval.cols(), 0);
      std::vector<double> a, b;
      for (std::size_t r = 0; r < eval.rows(); ++r) {
        if (!eval(r, c)) continue;
        one(r, c) = 1;
        a.push_back(truth.values(r, c));
        b.push_back(imputed(r, c));
      }
      cm.r2 = r2.per_column[c];
      std::vector<std::size_t> sk;
      cm.rmse = scale == RmseScale::kStandardized && column_std(truth.values, c) <= 0.0
                    ? std::numeric_limits<double>::quiet_NaN()
                    : rmse(truth.values, imputed, one, scale, scaler, &sk);
      cm.wd = wasserstein_1d(a, b);
      wd_sum += cm.wd;
      ++eligible;
    } else {
      cm.r2 = cm.rmse = cm.wd = std::numeric_limits<double>::quiet_NaN();
    }
    rep.columns.push_back(std::move(cm));
  }
  rep.wd_mean = wd_sum / static_cast<double>(eligible);
  return rep;
}

namespace {

nlohmann::ordered_json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

std::string report_to_json(const MetricsReport& rep) {
  nlohmann::ordered_json cols = nlohmann::ordered_json::array();
  for (const auto& c : rep.columns) {
    cols.push_back({{"name", c.name},
                    {"n_eval", c.n_eval},
                    {"r2", num(c.r2)},
                    {"rmse", num(c.rmse)},
                    {"wd", num(c.wd)}});
  }
  nlohmann::ordered_json j{
      {"aggregate",
       {{"r2_mean", rep.r2_mean},
        {"rmse", rep.rmse},
        {"wd_mean", rep.wd_mean},
        {"n_eval", rep.n_eval}}},
      {"rmse_by_scale",
       {{"standardized", rep.rmse_standardized},
        {"original", rep.rmse_original},
        {"minmax", rep.rmse_minmax ? num(*rep.rmse_minmax) : nullptr}}},
      {"columns", cols},
      {"meta",
       {{"r2", "squared Pearson correlation per column, 0 for constant sides, mean over columns "
               "with n_eval >= 2"},
        {"rmse_scale", std::string(to_string(rep.scale))},
        {"rmse", "pooled over eval cells of eligible columns"},
        {"wd", "1-D Wasserstein-1 per column on the original scale, mean over eligible columns"}}},
      {"warnings", rep.warnings},
  };
  return j.dump(2);
}

std::string report_to_text(const MetricsReport& rep) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  std::size_t w = 6;
  for (const auto& c : rep.columns) w = std::max(w, c.name.size());
  auto cell = [&out](double v) {
    if (std::isfinite(v)) {
      out << std::setw(10) << v;
    } else {
      out << std::setw(10) << "-";
    }
  };
  out << std::left << std::setw(static_cast<int>(w)) << "column" << std::right << std::setw(8)
      << "n_eval" << std::setw(10) << "r2" << std::setw(10) << "rmse" << std::setw(10) << "wd"
      << '\n';
  for (const auto& c : rep.columns) {
    out << std::left << std::setw(static_cast<int>(w)) << c.name << std::right << std::setw(8)
        << c.n_eval;
    cell(c.r2);
    cell(c.rmse);
    cell(c.wd);
    out << '\n';
  }
  out << std::left << std::setw(static_cast<int>(w)) << "mean" << std::right << std::setw(8)
      << rep.n_eval;
  cell(rep.r2_mean);
  cell(rep.rmse);
  cell(rep.wd_mean);
  out << "\n(rmse scale: " << to_string(rep.scale) << ")\n";
  for (const auto& wmsg : rep.warnings) out << "warning: " << wmsg << '\n';
  return out.str();
}

}  // namespace cacti
