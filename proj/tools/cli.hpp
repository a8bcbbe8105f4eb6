#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dinigrad::cli {

enum ExitCode : int { kPass = 0, kVerdictFail = 1, kConfigError = 2, kNumericalFailure = 3 };

/// Runs one command line (argv[0] is the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dinigrad::cli
