// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace capmine {

/// Exit codes of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `capmine` tool: mine, generate, serve, export, import.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace capmine
