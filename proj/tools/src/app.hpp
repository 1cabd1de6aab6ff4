#pragma once

#include <string>
#include <vector>

namespace fleetcm::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kDataError = 3,
  kNumericError = 4,
};

// argv[0] is the program name. Never throws; errors are reported on stderr
// and mapped to an exit code.
int run(const std::vector<std::string>& argv);

}  // namespace fleetcm::cli
