#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bilevel::cli {

enum ExitCode : int {
  kOk = 0,
  kParseError = 2,
  kSolverFailure = 3,
  kInvalidFlags = 4,
};

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bilevel::cli
