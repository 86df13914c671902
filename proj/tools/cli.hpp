#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace thermotune::cli {

enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kUsageError = 2 };

/// Runs one command line (argv[0] included) and returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace thermotune::cli
