#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stosdp::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kSuccess = 0,
  kAssumptionFailure = 1,
  kUsageError = 2,
  kConvergenceFailure = 3,
};

/// Runs `stosdp <args...>` (args excludes the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stosdp::cli
