// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cacti {

/// Machine-readable error categories. The CLI prints `kind_name(kind)` as the
/// reason prefix and derives its exit code from the category.
enum class ErrorKind {
  kParse,
  kSchema,
  kInvalidArgument,
  kShape,
  kInvalidMask,
  kUnscalableColumn,
  kSimulator,
  kFormat,
  kCoverage,
  kConfig,
  kNumeric,
  kCheckpoint,
  kRow,
  kMetric,
  kDegenerateTest,
  kInvalidInput,
  kInvalidBatch,
  kIo,
};

constexpr std::string_view kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse-error";
    case ErrorKind::kSchema: return "schema-error";
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kShape: return "shape-error";
    case ErrorKind::kInvalidMask: return "invalid-mask";
    case ErrorKind::kUnscalableColumn: return "unscalable-column";
    case ErrorKind::kSimulator: return "simulator-error";
    case ErrorKind::kFormat: return "format-error";
    case ErrorKind::kCoverage: return "coverage-error";
    case ErrorKind::kConfig: return "config-error";
    case ErrorKind::kNumeric: return "numeric-error";
    case ErrorKind::kCheckpoint: return "checkpoint-error";
    case ErrorKind::kRow: return "row-error";
    case ErrorKind::kMetric: return "metric-error";
    case ErrorKind::kDegenerateTest: return "degenerate-test";
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kInvalidBatch: return "invalid-batch";
    case ErrorKind::kIo: return "io-error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace cacti
