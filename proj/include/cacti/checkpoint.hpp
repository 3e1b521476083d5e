// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint. Layout (all integers little-endian):
//
//   "CACT"  u32 version
//   ModelConfig   u64 features, embed_dim, enc_depth, dec_depth, heads,
//                 mlp_ratio, ctx_raw_dim; f64 ctx_fraction
//   ScalerState   u64 K; K × f64 min; K × f64 max
//   u64 schema digest
//   u64 n; n bytes of schema JSON (names, kinds, category labels)
//   u64 P; P × f32 parameters in ParamLayout order

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "cacti/dataset.hpp"
#include "cacti/model.hpp"

namespace cacti {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ScalerState scaler;
  Schema schema;
  ModelParams<float> params;

  const ModelConfig& config() const noexcept { return params.config; }
};

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws a checkpoint error when `schema` does not match the one the
/// checkpoint was trained on.
void check_schema(const Checkpoint& ckpt, const Schema& schema);

std::string schema_to_json(const Schema& schema);
Schema schema_from_json(std::string_view text);

}  // namespace cacti
