#pragma once

#include <ostream>

namespace cvsim {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitParse = 2,
  kExitRefused = 3,
  kExitNumerical = 4,
  kExitUsage = 5,
};

/// Entry point of the `cvsim` tool: run, classify, sample, compare, bench.
/// Results go to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cvsim
