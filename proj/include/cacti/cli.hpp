// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 2 validation error (bad
// flags, malformed input, configuration), 3 checkpoint error (including a
// schema mismatch), 1 anything else. Errors print one line
// "error: <kind>: <message>" to `err`.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cacti {

inline constexpr const char* kVersion = "0.1.0";

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cacti
