// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tabular data: schema, CSV loading, min-max scaling, and train/test splits.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cacti/matrix.hpp"

namespace cacti {

enum class ColumnKind { kContinuous, kInteger, kCategorical, kBinary };

std::string_view to_string(ColumnKind kind);
ColumnKind parse_column_kind(std::string_view text);

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
  /// Category labels in code order; empty unless categorical.
  std::vector<std::string> categories;

  bool operator==(const ColumnSchema&) const = default;
};

using Schema = std::vector<ColumnSchema>;

/// Column-name → kind overrides applied while loading.
using SchemaHint = std::map<std::string, ColumnKind>;

/// N×K table. Cells with observed == 0 hold NaN and are never read as data.
/// `text` optionally carries the original CSV token of each cell so observed
/// cells can be written back byte-identically; it is either empty or N·K long.
struct Table {
  Schema schema;
  Matrix<double> values;
  Mask observed;
  std::vector<std::string> text;

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t cols() const noexcept { return schema.size(); }
  bool is_observed(std::size_t r, std::size_t c) const { return observed(r, c) != 0; }
};

struct CsvOptions {
  SchemaHint hint;
  /// When set, categorical columns are encoded against these categories
  /// instead of first-appearance order; column names must match.
  std::optional<Schema> fixed_schema;
  /// Accept numeric tokens in categorical columns as raw (possibly
  /// fractional) codes. Used to read back unrounded imputations.
  bool numeric_categorical_codes = false;
};

Table parse_csv(std::string_view content, const CsvOptions& options = {});
Table load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
SchemaHint load_schema_hint(const std::filesystem::path& path);

/// Writes the table; observed cells reuse their original token when present.
/// Categorical cells are written as labels when `decode_categorical` is set
/// (values are rounded to the nearest valid code first), otherwise as numbers.
void write_csv(std::ostream& out, const Table& table, bool decode_categorical = false);
void write_csv(const std::filesystem::path& path, const Table& table,
               bool decode_categorical = false);

/// Shortest round-trip decimal rendering of a double.
std::string format_number(double value);

/// Mask CSV: header row of column names, 0/1 cells.
Mask parse_mask_csv(std::string_view content, const Schema& schema);
Mask load_mask_csv(const std::filesystem::path& path, const Schema& schema);
void write_mask_csv(std::ostream& out, const Mask& mask, const Schema& schema);
void write_mask_csv(const std::filesystem::path& path, const Mask& mask, const Schema& schema);

/// Digest over column names and kinds (category order excluded).
std::uint64_t schema_digest(const Schema& schema);

Table select_rows(const Table& table, const std::vector<std::size_t>& rows);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed);
std::pair<Table, Table> split_train_test(const Table& table, double test_fraction,
                                         std::uint64_t seed);

struct ScalerState {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t cols() const noexcept { return min.size(); }
  double scale(std::size_t col, double x) const;
  double invert(std::size_t col, double s) const;
  bool operator==(const ScalerState&) const = default;
};

ScalerState fit_scaler(const Table& table);
Table apply_scaler(const Table& table, const ScalerState& scaler);
Matrix<double> invert_scaler(const Matrix<double>& scaled, const ScalerState& scaler);

/// Rounds a categorical code to the nearest valid index.
std::size_t round_category(double code, std::size_t n_categories);

}  // namespace cacti
