// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include "cacti/context.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cacti/error.hpp"

namespace cacti {
namespace {

using nlohmann::json;

json parse_strict(std::string_view text) {
  // nlohmann keeps the last duplicate silently; track keys per open object.
  std::vector<std::set<std::string>> open;
  auto cb = [&open](int, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start: open.emplace_back(); break;
      case json::parse_event_t::object_end: open.pop_back(); break;
      case json::parse_event_t::key: {
        const auto key = parsed.get<std::string>();
        if (!open.back().insert(key).second) {
          fail(ErrorKind::kFormat, "duplicate key '" + key + "'");
        }
        break;
      }
      default: break;
    }
    return true;
  };
  try {
    return json::parse(text.begin(), text.end(), cb);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("context file: ") + e.what());
  }
}

}  // namespace

ContextEmbeddings parse_context(std::string_view json_text) {
  const json doc = parse_strict(json_text);
  require(doc.is_object(), ErrorKind::kFormat, "context file must be a JSON object");
  require(doc.contains("model") && doc["model"].is_string(), ErrorKind::kFormat,
          "context file: missing string field 'model'");
  require(doc.contains("dim") && doc["dim"].is_number_integer(), ErrorKind::kFormat,
          "context file: missing integer field 'dim'");
  require(doc.contains("columns") && doc["columns"].is_object(), ErrorKind::kFormat,
          "context file: missing object field 'columns'");
  ContextEmbeddings emb;
  emb.model_name = doc["model"].get<std::string>();
  const auto dim = doc["dim"].get<long long>();
  require(dim >= 1, ErrorKind::kFormat, "context file: dim must be >= 1");
  emb.dim = static_cast<std::size_t>(dim);
  for (const auto& [name, vec] : doc["columns"].items()) {
    require(vec.is_array(), ErrorKind::kFormat, "column " + name + ": vector must be an array");
    require(vec.size() == emb.dim, ErrorKind::kFormat,
            "column " + name + ": length " + std::to_string(vec.size()) + " != dim " +
                std::to_string(emb.dim));
    std::vector<double> values;
    values.reserve(vec.size());
    for (const auto& x : vec) {
      require(x.is_number(), ErrorKind::kFormat, "column " + name + ": non-numeric entry");
      const double v = x.get<double>();
      require(std::isfinite(v), ErrorKind::kFormat, "column " + name + ": non-finite entry");
      values.push_back(v);
    }
    emb.vectors.emplace(name, std::move(values));
  }
  return emb;
}

ContextEmbeddings load_context(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_context(ss.str());
}

std::string context_to_json(const ContextEmbeddings& emb) {
  json doc;
  doc["model"] = emb.model_name;
  doc["dim"] = emb.dim;
  doc["columns"] = json::object();
  for (const auto& [name, vec] : emb.vectors) doc["columns"][name] = vec;
  return doc.dump();
}

void save_context(const std::filesystem::path& path, const ContextEmbeddings& emb) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  out << context_to_json(emb) << '\n';
}

Matrix<double> align_to_schema(const ContextEmbeddings& emb, const Schema& schema,
                               bool allow_missing) {
  std::string absent;
  Matrix<double> out(schema.size(), emb.dim, 0.0);
  for (std::size_t k = 0; k < schema.size(); ++k) {
    const auto it = emb.vectors.find(schema[k].name);
    if (it == emb.vectors.end()) {
      if (!allow_missing) absent += (absent.empty() ? "" : ", ") + schema[k].name;
      continue;
    }
    std::copy(it->second.begin(), it->second.end(), out.row(k).begin());
  }
  require(absent.empty(), ErrorKind::kCoverage, "context missing for columns: " + absent);
  return out;
}

}  // namespace cacti
