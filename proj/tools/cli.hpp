#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nestdoa::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kConfigError = 2,
  kNumericalError = 3,
};

/// Run the `doa` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nestdoa::cli
