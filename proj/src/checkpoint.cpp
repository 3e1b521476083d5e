// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include "cacti/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "cacti/error.hpp"
#include "json.hpp"

namespace cacti {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <class T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_size(std::size_t v) { put<std::uint64_t>(v); }
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <class T>
  T get() {
    T v{};
    bytes(&v, sizeof(T));
    return v;
  }
  std::size_t get_size(std::size_t limit) {
    const auto v = get<std::uint64_t>();
    require(v <= limit, ErrorKind::kCheckpoint, "implausible size field in checkpoint");
    return static_cast<std::size_t>(v);
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    require(static_cast<std::size_t>(in_.gcount()) == n, ErrorKind::kCheckpoint,
            "truncated checkpoint");
  }

 private:
  std::istream& in_;
};

constexpr std::size_t kMaxDim = std::size_t{1} << 32;

}  // namespace

std::string schema_to_json(const Schema& schema) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : schema) {
    nlohmann::json j{{"name", c.name}, {"kind", std::string(to_string(c.kind))}};
    if (c.kind == ColumnKind::kCategorical) j["categories"] = c.categories;
    cols.push_back(std::move(j));
  }
  return nlohmann::json{{"columns", cols}}.dump();
}

Schema schema_from_json(std::string_view text) {
  Schema schema;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& c : j.at("columns")) {
      ColumnSchema col;
      col.name = c.at("name").get<std::string>();
      col.kind = parse_column_kind(c.at("kind").get<std::string>());
      if (c.contains("categories")) col.categories = c["categories"].get<std::vector<std::string>>();
      schema.push_back(std::move(col));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kCheckpoint, std::string("bad schema block: ") + e.what());
  }
  return schema;
}

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto& cfg = ckpt.config();
  require(ckpt.scaler.cols() == cfg.features && ckpt.schema.size() == cfg.features,
          ErrorKind::kCheckpoint, "scaler/schema width differs from model features");
  Writer w(out);
  w.bytes("CACT", 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  for (std::size_t v : {cfg.features, cfg.embed_dim, cfg.enc_depth, cfg.dec_depth, cfg.heads,
                        cfg.mlp_ratio, cfg.ctx_raw_dim}) {
    w.put_size(v);
  }
  w.put<double>(cfg.ctx_fraction);
  w.put_size(ckpt.scaler.cols());
  for (double v : ckpt.scaler.min) w.put(v);
  for (double v : ckpt.scaler.max) w.put(v);
  w.put<std::uint64_t>(schema_digest(ckpt.schema));
  const std::string schema = schema_to_json(ckpt.schema);
  w.put_size(schema.size());
  w.bytes(schema.data(), schema.size());
  w.put_size(ckpt.params.values.size());
  w.bytes(ckpt.params.values.data(), ckpt.params.values.size() * sizeof(float));
  require(static_cast<bool>(out), ErrorKind::kIo, "failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  save_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(std::istream& in) {
  Reader r(in);
  char magic[4];
  r.bytes(magic, 4);
  require(std::memcmp(magic, "CACT", 4) == 0, ErrorKind::kCheckpoint, "not a checkpoint file");
  const auto version = r.get<std::uint32_t>();
  require(version == kCheckpointVersion, ErrorKind::kCheckpoint,
          "unsupported checkpoint version " + std::to_string(version));
  ModelConfig cfg;
  cfg.features = r.get_size(kMaxDim);
  cfg.embed_dim = r.get_size(kMaxDim);
  cfg.enc_depth = r.get_size(kMaxDim);
  cfg.dec_depth = r.get_size(kMaxDim);
  cfg.heads = r.get_size(kMaxDim);
  cfg.mlp_ratio = r.get_size(kMaxDim);
  cfg.ctx_raw_dim = r.get_size(kMaxDim);
  cfg.ctx_fraction = r.get<double>();
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kCheckpoint, std::string("invalid model config: ") + e.what());
  }
  ScalerState scaler;
  const std::size_t k = r.get_size(kMaxDim);
  require(k == cfg.features, ErrorKind::kCheckpoint, "scaler width differs from features");
  scaler.min.resize(k);
  scaler.max.resize(k);
  for (auto& v : scaler.min) v = r.get<double>();
  for (auto& v : scaler.max) v = r.get<double>();
  const auto digest = r.get<std::uint64_t>();
  std::string schema_text(r.get_size(kMaxDim), '\0');
  r.bytes(schema_text.data(), schema_text.size());
  Schema schema = schema_from_json(schema_text);
  require(schema.size() == k && schema_digest(schema) == digest, ErrorKind::kCheckpoint,
          "schema block does not match its digest");

  Checkpoint ckpt{std::move(scaler), std::move(schema), ModelParams<float>(cfg)};
  const std::size_t p = r.get_size(std::size_t{1} << 40);
  require(p == ckpt.params.values.size(), ErrorKind::kCheckpoint,
          "parameter count " + std::to_string(p) + " differs from layout " +
              std::to_string(ckpt.params.values.size()));
  r.bytes(ckpt.params.values.data(), p * sizeof(float));
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path.string());
  return load_checkpoint(in);
}

void check_schema(const Checkpoint& ckpt, const Schema& schema) {
  if (schema_digest(schema) == schema_digest(ckpt.schema)) return;
  std::string want;
  for (const auto& c : ckpt.schema) want += (want.empty() ? "" : ",") + c.name;
  fail(ErrorKind::kCheckpoint, "checkpoint schema mismatch (expected columns " + want + ")");
}

}  // namespace cacti
