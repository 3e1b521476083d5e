// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "cacti/dataset.hpp"
#include "cacti/metrics.hpp"
#include "cacti/missingness.hpp"
#include "cacti/rng.hpp"
#include "cacti/synthetic.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace cacti;
using cacti::test::error_kind;

namespace {

Matrix<double> column(std::initializer_list<double> v) {
  Matrix<double> m(v.size(), 1);
  std::copy(v.begin(), v.end(), m.flat().begin());
  return m;
}

// W1 oracle: replicate every sample so both sides have lcm size, then the
// distance is the mean gap between sorted samples.
double w1_oracle(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = std::lcm(a.size(), b.size());
  std::vector<double> ra, rb;
  for (double v : a) ra.insert(ra.end(), n / a.size(), v);
  for (double v : b) rb.insert(rb.end(), n / b.size(), v);
  std::sort(ra.begin(), ra.end());
  std::sort(rb.begin(), rb.end());
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(ra[i] - rb[i]);
  return s / static_cast<double>(n);
}

}  // namespace

TEST_CASE("r2: perfect, affine, constant") {
  const auto t = column({1, 2, 4, 8});
  const Mask all(4, 1, 1);
  CHECK(r_squared(t, t, all).mean == doctest::Approx(1.0));
  const auto aff = column({9, 11, 15, 23});
  CHECK(r_squared(t, aff, all).mean == doctest::Approx(1.0));
  CHECK(r_squared(t, column({3, 3, 3, 3}), all).mean == 0.0);
  CHECK(r_squared(column({3, 3, 3, 3}), t, all).mean == 0.0);
}

TEST_CASE("r2: affine invariance property") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix<double> t(30, 3), imp(30, 3), aff(30, 3);
    const double alpha = 0.1 + 5 * rng.uniform();
    const double beta = rng.normal() * 10;
    for (std::size_t i = 0; i < t.size(); ++i) {
      t.flat()[i] = rng.normal();
      imp.flat()[i] = t.flat()[i] + rng.normal();
      aff.flat()[i] = alpha * imp.flat()[i] + beta;
    }
    const Mask eval = simulate_mcar(30, 3, 0.5, trial + 1);
    CHECK(r_squared(t, aff, eval).mean == doctest::Approx(r_squared(t, imp, eval).mean).epsilon(1e-10));
  }
}

TEST_CASE("r2: ineligible columns and no eligible column") {
  Matrix<double> t(3, 2, 0.0);
  t(0, 0) = 1;
  t(1, 0) = 2;
  Mask eval(3, 2, 0);
  eval(0, 0) = eval(1, 0) = eval(2, 0) = 1;
  eval(0, 1) = 1;  // one cell: below the per-column minimum
  const auto r = r_squared(t, t, eval);
  CHECK(std::isnan(r.per_column[1]));
  CHECK(r.mean == doctest::Approx(1.0));
  CHECK(error_kind([&] { r_squared(t, t, Mask(3, 2, 0)); }) == ErrorKind::kMetric);
}

TEST_CASE("rmse: scales") {
  const auto t = column({4, 0});
  auto imp = column({7, 0});
  Mask eval(2, 1, 0);
  eval(0, 0) = 1;
  CHECK(rmse(t, imp, eval, RmseScale::kOriginal) == 3.0);
  CHECK(rmse(t, imp, eval, RmseScale::kStandardized) == doctest::Approx(1.5));  // std{4,0} = 2
  const ScalerState s{{0.0}, {6.0}};
  CHECK(rmse(t, imp, eval, RmseScale::kMinMax, &s) == doctest::Approx(0.5));
  CHECK(error_kind([&] { rmse(t, imp, eval, RmseScale::kMinMax); }) == ErrorKind::kMetric);
  for (auto sc : {RmseScale::kOriginal, RmseScale::kStandardized, RmseScale::kMinMax}) {
    CHECK(rmse(t, t, eval, sc, &s) == 0.0);
  }
  std::vector<std::size_t> skipped;
  Matrix<double> two(2, 2, 1.0);
  two(0, 0) = 3;
  Matrix<double> imp2 = two;
  imp2(0, 0) = 4;
  imp2(0, 1) = 9;
  Mask ev(2, 2, 1);
  CHECK(rmse(two, imp2, ev, RmseScale::kStandardized, nullptr, &skipped) ==
        doctest::Approx(std::sqrt(1.0 / 2.0)));  // column 0: residual 1 / std 1 over 2 cells
  CHECK(skipped == std::vector<std::size_t>{1});
  // A constant column whose mean is inexact is still treated as constant.
  Matrix<double> tenths(3, 1, 0.1);
  skipped.clear();
  CHECK(error_kind([&] {
          rmse(tenths, column({0.2, 0.3, 0.4}), Mask(3, 1, 1), RmseScale::kStandardized, nullptr,
               &skipped);
        }) == ErrorKind::kMetric);
  CHECK(skipped == std::vector<std::size_t>{0});
}

TEST_CASE("w1: examples") {
  const std::vector<double> a{0, 0}, b{0, 2}, z{0}, o{1};
  CHECK(wasserstein_1d(a, b) == 1.0);
  CHECK(wasserstein_1d(z, o) == 1.0);
  CHECK(wasserstein_1d(b, b) == 0.0);
}

TEST_CASE("w1: matches the replication oracle, symmetric, triangle") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto draw = [&] {
      std::vector<double> v(1 + rng.below(9));
      for (auto& x : v) x = std::round(rng.normal() * 4) / 2;
      return v;
    };
    const auto a = draw(), b = draw(), c = draw();
    const double ab = wasserstein_1d(a, b);
    CHECK(ab == doctest::Approx(w1_oracle(a, b)).epsilon(1e-12));
    CHECK(ab == doctest::Approx(wasserstein_1d(b, a)).epsilon(1e-12));
    CHECK(ab <= wasserstein_1d(a, c) + wasserstein_1d(c, b) + 1e-12);
    CHECK(wasserstein_1d(a, a) == 0.0);
  }
}

TEST_CASE("mean imputer") {
  const Table t = parse_csv("a,b\n2,1\nNA,1\n4,1\n");
  const Table m = mean_impute(t);
  CHECK(m.values(1, 0) == 3.0);
  CHECK(m.observed(1, 0) == 1);
  const Table full = parse_csv("a\n1\n2\n");
  CHECK(mean_impute(full).values == full.values);
  CHECK(error_kind([] { mean_impute(parse_csv("a,b\n1,NA\n2,NA\n")); }) == ErrorKind::kInvalidInput);
}

TEST_CASE("mean imputer: R2 exactly 0, standardized RMSE near 1") {
  const Table g = gaussian_table(12000, 1, 0.0, 12);
  const Mask m = simulate_mcar(12000, 1, 0.3, 13);
  const Table imp = mean_impute(apply_mask(g, m));
  Mask eval(m.rows(), 1);
  for (std::size_t i = 0; i < m.size(); ++i) eval.flat()[i] = m.flat()[i] == 0;
  const MetricsReport rep = evaluate(g, imp.values, eval);
  CHECK(rep.n_eval >= 3000);
  CHECK(rep.r2_mean == 0.0);
  CHECK(rep.rmse_standardized >= 0.9);
  CHECK(rep.rmse_standardized <= 1.05);
}

TEST_CASE("metrics read only eval cells") {
  Rng rng(4);
  const Table g = gaussian_table(200, 3, 0.5, 2);
  Matrix<double> imp = g.values;
  for (auto& v : imp.flat()) v += rng.normal();
  Mask eval = simulate_mcar(200, 3, 0.4, 3);
  const std::string before = report_to_json(evaluate(g, imp, eval));
  for (std::size_t i = 0; i < imp.size(); ++i) {
    if (!eval.flat()[i]) imp.flat()[i] = 1e6;
  }
  CHECK(report_to_json(evaluate(g, imp, eval)) == before);
}

TEST_CASE("paired t-test") {
  const std::vector<double> a{1, 3}, b{0, 0};
  const auto r = paired_t_test_one_sided(a, b);
  CHECK(r.t == doctest::Approx(2.0));
  CHECK(r.dof == 1);
  // Cauchy upper tail.
  CHECK(std::abs(r.p - (0.5 - std::atan(2.0) / std::numbers::pi)) < 1e-8);
  CHECK(std::abs(r.p - 0.147584) < 1e-6);

  // Two dof: upper tail 1/2 − t / (2 sqrt(2 + t²)).
  const std::vector<double> c{1, 2, 6}, z{0, 0, 0};
  const auto r2 = paired_t_test_one_sided(c, z);
  const double t = 3.0 * std::sqrt(3.0 / 7.0);
  CHECK(r2.t == doctest::Approx(t));
  CHECK(std::abs(r2.p - (0.5 - t / (2.0 * std::sqrt(2.0 + t * t)))) < 1e-8);

  const std::vector<double> s{1, -1, 1, -1};
  const auto r3 = paired_t_test_one_sided(s, std::vector<double>(4, 0.0));
  CHECK(r3.t == 0.0);
  CHECK(r3.p == doctest::Approx(0.5));
  CHECK(error_kind([&] { paired_t_test_one_sided(a, a); }) == ErrorKind::kDegenerateTest);
}

TEST_CASE("report json is annotated") {
  const Table g = gaussian_table(50, 2, 0.5, 2);
  const auto j = nlohmann::json::parse(report_to_json(evaluate(g, g.values, Mask(50, 2, 1))));
  CHECK(j["aggregate"]["r2_mean"].get<double>() == doctest::Approx(1.0));
  CHECK(j.contains("meta"));
  CHECK(j["columns"].size() == 2);
}
