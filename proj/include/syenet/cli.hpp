// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sye::cli {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;  // validation, check, mode, format or I/O failure
constexpr int kExitUsage = 2;

/// Runs one subcommand; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sye::cli
