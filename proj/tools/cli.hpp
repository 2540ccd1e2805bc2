#pragma once

#include <string>
#include <vector>

namespace thinkswitch::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeFailure = 1,
  kConfigError = 2,
  kEndpointUnreachable = 3,
  kBindFailure = 4,
};

/// Entry point shared by the binary and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args);

}  // namespace thinkswitch::cli
