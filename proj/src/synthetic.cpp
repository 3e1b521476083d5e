// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include "cacti/synthetic.hpp"

#include <cmath>

#include "cacti/error.hpp"
#include "cacti/rng.hpp"

namespace cacti {

Table gaussian_table(std::size_t rows, std::size_t cols, double rho, std::uint64_t seed) {
  require(cols >= 1, ErrorKind::kInvalidArgument, "synthetic table needs at least one column");
  require(rho >= 0.0 && rho < 1.0, ErrorKind::kInvalidArgument, "rho must lie in [0, 1)");
  Table t;
  for (std::size_t c = 0; c < cols; ++c) t.schema.push_back({"x" + std::to_string(c), {}, {}});
  t.values = Matrix<double>(rows, cols);
  t.observed = Mask(rows, cols, 1);
  Rng rng(seed);
  const double a = std::sqrt(rho);
  const double b = std::sqrt(1.0 - rho);
  for (std::size_t r = 0; r < rows; ++r) {
    const double z0 = rng.normal();
    for (std::size_t c = 0; c < cols; ++c) t.values(r, c) = a * z0 + b * rng.normal();
  }
  return t;
}

}  // namespace cacti
