#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace libration::cli {

enum ExitCode : int {
  exit_ok = 0,
  exit_config = 1,
  exit_hypothesis = 2,
  exit_numerical = 3,
  exit_verification = 4,
};

/// Runs one command line (without the program name). Reports go to `out`
/// unless an output path is configured; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace libration::cli
