#pragma once

#include <ostream>

namespace dhsketch::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kRuntimeError = 2;

/// Entry point for the `dhsketch` tool: `generate`, `run` and `query`
/// subcommands. Data goes to files or `out`; diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dhsketch::cli
