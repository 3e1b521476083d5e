// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include "cacti/imputation.hpp"

#include <algorithm>

#include "cacti/error.hpp"
#include "cacti/model.hpp"

namespace cacti {

Matrix<double> predict_scaled(const Matrix<double>& scaled, const Mask& observed,
                              const ModelParams<float>& params, const Matrix<double>* ctx,
                              std::size_t batch_size) {
  const std::size_t n = scaled.rows();
  const std::size_t k = scaled.cols();
  require(batch_size >= 1, ErrorKind::kInvalidArgument, "batch size must be >= 1");
  require(k == params.config.features, ErrorKind::kShape,
          "table has " + std::to_string(k) + " columns, model expects " +
              std::to_string(params.config.features));
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = observed.row(r);
    require(std::any_of(row.begin(), row.end(), [](auto v) { return v != 0; }), ErrorKind::kRow,
            "row " + std::to_string(r) + " has no observed feature");
  }
  Matrix<float> ctx_f;
  const Matrix<float>* ctx_ptr = nullptr;
  if (params.config.has_context()) {
    require(ctx != nullptr, ErrorKind::kConfig, "model requires context embeddings");
    ctx_f = context_matrix<float>(*ctx);
    ctx_ptr = &ctx_f;
  }

  Matrix<double> out(n, k);
  ForwardCache<float> cache;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    Matrix<double> xb(end - start, k);
    Mask ob(end - start, k);
    for (std::size_t r = start; r < end; ++r) {
      std::copy(scaled.row(r).begin(), scaled.row(r).end(), xb.row(r - start).begin());
      std::copy(observed.row(r).begin(), observed.row(r).end(), ob.row(r - start).begin());
    }
    const BatchInputs in = make_inference_inputs(xb, ob);
    forward(params, ctx_ptr, in, cache);
    for (std::size_t i = 0; i < (end - start) * k; ++i) {
      out.flat()[start * k + i] = static_cast<double>(cache.output[i]);
    }
  }
  return out;
}

Table impute(const Table& table, const Checkpoint& ckpt, const Matrix<double>* ctx,
             const ImputeOptions& options) {
  check_schema(ckpt, table.schema);
  const std::size_t n = table.rows();
  const std::size_t k = table.cols();
  Table out = table;
  if (n == 0) return out;

  const Table scaled = apply_scaler(table, ckpt.scaler);
  const Matrix<double> pred =
      predict_scaled(scaled.values, scaled.observed, ckpt.params, ctx, options.batch_size);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      if (table.is_observed(r, c)) continue;
      double v = ckpt.scaler.invert(c, pred(r, c));
      const auto& col = table.schema[c];
      if (options.round_categorical && col.kind == ColumnKind::kCategorical &&
          !col.categories.empty()) {
        v = static_cast<double>(round_category(v, col.categories.size()));
      }
      out.values(r, c) = v;
      out.observed(r, c) = 1;
    }
  }
  return out;
}

}  // namespace cacti
