#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ddn/selftest.hpp"

namespace ddn::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kFormat = 3,
  kDivergence = 4,
  kCheckFailed = 5,
};

struct Hooks {
  /// Replaces the convolution examined by `selftest` (sensitivity testing).
  ConvFn selftest_conv;
};

/// Parses `args` (without the program name) and runs the subcommand.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Hooks& hooks = {});

}  // namespace ddn::cli
