#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tween::cli {

// Exit codes shared by every verb.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,         // bad arguments, config or input data
  kNumericAbort = 3,  // training diverged
  kMismatch = 4,      // checkpoint does not fit the data or its statistics
};

// Entry point behind the tween executable; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string version();

}  // namespace tween::cli
