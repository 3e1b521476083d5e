// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cacti/dataset.hpp"
#include "cacti/matrix.hpp"

namespace cacti {

/// Precomputed per-column text embeddings.
struct ContextEmbeddings {
  std::string model_name;
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> vectors;

  bool operator==(const ContextEmbeddings&) const = default;
};

/// Parses `{"model": str, "dim": int, "columns": {name: [float, ...]}}`.
/// Duplicate keys, length mismatches and non-finite entries are rejected.
ContextEmbeddings parse_context(std::string_view json_text);
ContextEmbeddings load_context(const std::filesystem::path& path);

std::string context_to_json(const ContextEmbeddings& emb);
void save_context(const std::filesystem::path& path, const ContextEmbeddings& emb);

/// K×dim matrix with rows in schema order. Absent columns are a coverage
/// error unless `allow_missing`, in which case they get zero vectors.
Matrix<double> align_to_schema(const ContextEmbeddings& emb, const Schema& schema,
                               bool allow_missing = false);

}  // namespace cacti
