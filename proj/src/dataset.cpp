// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include "cacti/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "cacti/error.hpp"
#include "cacti/rng.hpp"

namespace cacti {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// One CSV record; supports double-quoted fields with "" escapes.
std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.emplace_back(trim(cur));
  return fields;
}

std::vector<std::vector<std::string>> split_lines(std::string_view content) {
  if (content.size() >= 3 && static_cast<unsigned char>(content[0]) == 0xEF &&
      static_cast<unsigned char>(content[1]) == 0xBB &&
      static_cast<unsigned char>(content[2]) == 0xBF) {
    content.remove_prefix(3);
  }
  std::vector<std::vector<std::string>> records;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!trim(line).empty()) records.push_back(split_record(line));
    pos = end + 1;
  }
  return records;
}

bool is_missing_token(std::string_view token) { return token.empty() || token == "NA"; }

std::optional<double> parse_number(std::string_view token) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

void validate_schema(const Schema& schema) {
  std::set<std::string> names;
  for (const auto& col : schema) {
    require(!col.name.empty(), ErrorKind::kSchema, "empty column name");
    require(names.insert(col.name).second, ErrorKind::kSchema,
            "duplicate column name '" + col.name + "'");
    std::set<std::string> labels(col.categories.begin(), col.categories.end());
    require(labels.size() == col.categories.size(), ErrorKind::kSchema,
            "duplicate category label in column '" + col.name + "'");
  }
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kContinuous: return "continuous";
    case ColumnKind::kInteger: return "integer";
    case ColumnKind::kCategorical: return "categorical";
    case ColumnKind::kBinary: return "binary";
  }
  return "continuous";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "continuous") return ColumnKind::kContinuous;
  if (text == "integer") return ColumnKind::kInteger;
  if (text == "categorical") return ColumnKind::kCategorical;
  if (text == "binary") return ColumnKind::kBinary;
  fail(ErrorKind::kSchema, "unknown column kind '" + std::string(text) + "'");
}

Table parse_csv(std::string_view content, const CsvOptions& options) {
  const auto records = split_lines(content);
  require(!records.empty(), ErrorKind::kParse, "missing header row");
  const auto& header = records.front();
  const std::size_t k = header.size();
  const std::size_t n = records.size() - 1;
  require(n >= 1, ErrorKind::kParse, "no data rows");
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != k) {
      fail(ErrorKind::kParse, "row " + std::to_string(r - 1) + " has " +
                                  std::to_string(records[r].size()) + " fields, expected " +
                                  std::to_string(k));
    }
  }

  Table table;
  table.schema.resize(k);
  for (std::size_t c = 0; c < k; ++c) table.schema[c].name = header[c];
  if (options.fixed_schema) {
    const Schema& fixed = *options.fixed_schema;
    require(fixed.size() == k, ErrorKind::kSchema,
            "expected " + std::to_string(fixed.size()) + " columns, got " + std::to_string(k));
    for (std::size_t c = 0; c < k; ++c) {
      require(fixed[c].name == header[c], ErrorKind::kSchema,
              "column " + std::to_string(c) + " is '" + header[c] + "', expected '" +
                  fixed[c].name + "'");
    }
    table.schema = fixed;
  } else {
    for (auto& col : table.schema) {
      if (auto it = options.hint.find(col.name); it != options.hint.end()) col.kind = it->second;
    }
  }
  validate_schema(table.schema);

  table.values = Matrix<double>(n, k, kNaN);
  table.observed = Mask(n, k, 0);
  table.text.assign(n * k, std::string());

  for (std::size_t c = 0; c < k; ++c) {
    ColumnSchema& col = table.schema[c];
    bool as_labels = col.kind == ColumnKind::kCategorical;
    if (!as_labels) {
      bool any_numeric = false;
      bool any_label = false;
      for (std::size_t r = 0; r < n; ++r) {
        const std::string& tok = records[r + 1][c];
        if (is_missing_token(tok)) continue;
        (parse_number(tok) ? any_numeric : any_label) = true;
      }
      if (any_label) {
        if (any_numeric || options.hint.count(col.name) || options.fixed_schema) {
          fail(ErrorKind::kSchema, "column '" + col.name +
                                       "' mixes numeric and non-numeric tokens without a "
                                       "categorical hint");
        }
        col.kind = ColumnKind::kCategorical;
        as_labels = true;
      }
    }

    std::unordered_map<std::string, std::size_t> codes;
    for (std::size_t i = 0; i < col.categories.size(); ++i) codes.emplace(col.categories[i], i);
    const bool extend = !options.fixed_schema;

    for (std::size_t r = 0; r < n; ++r) {
      const std::string& tok = records[r + 1][c];
      if (is_missing_token(tok)) continue;
      table.text[r * k + c] = tok;
      table.observed(r, c) = 1;
      if (!as_labels) {
        table.values(r, c) = *parse_number(tok);
        continue;
      }
      if (auto it = codes.find(tok); it != codes.end()) {
        table.values(r, c) = static_cast<double>(it->second);
      } else if (options.numeric_categorical_codes && parse_number(tok)) {
        table.values(r, c) = *parse_number(tok);
      } else if (extend) {
        const std::size_t code = col.categories.size();
        col.categories.push_back(tok);
        codes.emplace(tok, code);
        table.values(r, c) = static_cast<double>(code);
      } else {
        fail(ErrorKind::kSchema,
             "unknown category '" + tok + "' in column '" + col.name + "'");
      }
    }
  }
  return table;
}

Table load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  return parse_csv(read_file(path), options);
}

SchemaHint load_schema_hint(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, "schema hint: " + std::string(e.what()));
  }
  require(doc.is_object(), ErrorKind::kFormat, "schema hint must be a JSON object");
  SchemaHint hint;
  for (const auto& [name, kind] : doc.items()) {
    require(kind.is_string(), ErrorKind::kFormat, "schema hint for '" + name + "' must be a string");
    hint[name] = parse_column_kind(kind.get<std::string>());
  }
  return hint;
}

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::size_t round_category(double code, std::size_t n_categories) {
  if (n_categories == 0) return 0;
  const double r = std::round(code);
  if (!(r > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(r), n_categories - 1);
}

void write_csv(std::ostream& out, const Table& table, bool decode_categorical) {
  const std::size_t k = table.cols();
  const bool have_text = table.text.size() == table.rows() * k;
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q.push_back('"');
      q.push_back(c);
    }
    q.push_back('"');
    return q;
  };
  for (std::size_t c = 0; c < k; ++c) out << (c ? "," : "") << quote(table.schema[c].name);
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      if (c) out << ',';
      if (!table.is_observed(r, c)) continue;
      if (have_text && !table.text[r * k + c].empty()) {
        out << quote(table.text[r * k + c]);
        continue;
      }
      const ColumnSchema& col = table.schema[c];
      const double v = table.values(r, c);
      if (decode_categorical && col.kind == ColumnKind::kCategorical && !col.categories.empty()) {
        out << quote(col.categories[round_category(v, col.categories.size())]);
      } else {
        out << format_number(v);
      }
    }
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Table& table, bool decode_categorical) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  write_csv(out, table, decode_categorical);
}

Mask parse_mask_csv(std::string_view content, const Schema& schema) {
  const auto records = split_lines(content);
  require(!records.empty(), ErrorKind::kParse, "mask: missing header row");
  const auto& header = records.front();
  require(header.size() == schema.size(), ErrorKind::kShape,
          "mask has " + std::to_string(header.size()) + " columns, table has " +
              std::to_string(schema.size()));
  for (std::size_t c = 0; c < header.size(); ++c) {
    require(header[c] == schema[c].name, ErrorKind::kShape,
            "mask column " + std::to_string(c) + " is '" + header[c] + "', expected '" +
                schema[c].name + "'");
  }
  Mask mask(records.size() - 1, header.size(), 0);
  for (std::size_t r = 1; r < records.size(); ++r) {
    require(records[r].size() == header.size(), ErrorKind::kParse,
            "mask row " + std::to_string(r - 1) + " has wrong length");
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::string& tok = records[r][c];
      require(tok == "0" || tok == "1", ErrorKind::kParse,
              "mask row " + std::to_string(r - 1) + " has non-binary cell '" + tok + "'");
      mask(r - 1, c) = tok == "1" ? 1 : 0;
    }
  }
  return mask;
}

Mask load_mask_csv(const std::filesystem::path& path, const Schema& schema) {
  return parse_mask_csv(read_file(path), schema);
}

void write_mask_csv(std::ostream& out, const Mask& mask, const Schema& schema) {
  for (std::size_t c = 0; c < schema.size(); ++c) out << (c ? "," : "") << schema[c].name;
  out << '\n';
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    for (std::size_t c = 0; c < mask.cols(); ++c) out << (c ? "," : "") << int{mask(r, c)};
    out << '\n';
  }
}

void write_mask_csv(const std::filesystem::path& path, const Mask& mask, const Schema& schema) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  write_mask_csv(out, mask, schema);
}

std::uint64_t schema_digest(const Schema& schema) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::string_view s) {
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    h ^= 0xff;
    h *= 0x100000001b3ull;
  };
  for (const auto& col : schema) {
    mix(col.name);
    mix(to_string(col.kind));
  }
  return h;
}

Table select_rows(const Table& table, const std::vector<std::size_t>& rows) {
  const std::size_t k = table.cols();
  const bool have_text = table.text.size() == table.rows() * k;
  Table out;
  out.schema = table.schema;
  out.values = Matrix<double>(rows.size(), k);
  out.observed = Mask(rows.size(), k);
  if (have_text) out.text.resize(rows.size() * k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    require(r < table.rows(), ErrorKind::kInvalidArgument, "row index out of range");
    std::copy_n(table.values.row(r).begin(), k, out.values.row(i).begin());
    std::copy_n(table.observed.row(r).begin(), k, out.observed.row(i).begin());
    if (have_text) {
      std::copy_n(table.text.begin() + static_cast<std::ptrdiff_t>(r * k), k,
                  out.text.begin() + static_cast<std::ptrdiff_t>(i * k));
    }
  }
  return out;
}

SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
  require(n >= 2, ErrorKind::kInvalidArgument, "split needs at least 2 rows");
  require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::kInvalidArgument,
          "test fraction must lie in (0, 1)");
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  require(n_test >= 1 && n_test < n, ErrorKind::kInvalidArgument,
          "test fraction yields an empty split");
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  SplitIndices out;
  out.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  return out;
}

std::pair<Table, Table> split_train_test(const Table& table, double test_fraction,
                                         std::uint64_t seed) {
  const auto idx = split_indices(table.rows(), test_fraction, seed);
  return {select_rows(table, idx.train), select_rows(table, idx.test)};
}

double ScalerState::scale(std::size_t col, double x) const {
  const double range = max[col] - min[col];
  if (range == 0.0) return 0.5;
  return (x - min[col]) / range;
}

double ScalerState::invert(std::size_t col, double s) const {
  return s * (max[col] - min[col]) + min[col];
}

ScalerState fit_scaler(const Table& table) {
  const std::size_t k = table.cols();
  ScalerState scaler;
  scaler.min.assign(k, std::numeric_limits<double>::infinity());
  scaler.max.assign(k, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> count(k, 0);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      if (!table.is_observed(r, c)) continue;
      const double v = table.values(r, c);
      scaler.min[c] = std::min(scaler.min[c], v);
      scaler.max[c] = std::max(scaler.max[c], v);
      ++count[c];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    require(count[c] > 0, ErrorKind::kUnscalableColumn,
            "column '" + table.schema[c].name + "' has no observed cells");
  }
  return scaler;
}

Table apply_scaler(const Table& table, const ScalerState& scaler) {
  require(scaler.cols() == table.cols(), ErrorKind::kShape,
          "scaler has " + std::to_string(scaler.cols()) + " columns, table has " +
              std::to_string(table.cols()));
  Table out = table;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      if (out.is_observed(r, c)) out.values(r, c) = scaler.scale(c, out.values(r, c));
    }
  }
  out.text.clear();
  return out;
}

Matrix<double> invert_scaler(const Matrix<double>& scaled, const ScalerState& scaler) {
  require(scaler.cols() == scaled.cols(), ErrorKind::kShape,
          "scaler has " + std::to_string(scaler.cols()) + " columns, values have " +
              std::to_string(scaled.cols()));
  Matrix<double> out = scaled;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = scaler.invert(c, out(r, c));
  }
  return out;
}

}  // namespace cacti
