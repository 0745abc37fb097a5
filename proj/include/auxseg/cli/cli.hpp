#pragma once

#include <string>
#include <vector>

#include "auxseg/common.hpp"

namespace auxseg::cli {

/// Invalid invocation: unknown flags, missing required inputs, bad config.
/// Maps to exit code 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitFailure = 2 };

/// Entry point of the `auxseg` tool. Subcommands: gen, train, predict, eval,
/// baseline-frangi, report. Returns 0 on success, 1 on usage errors and 2 on
/// runtime failures; never throws.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

/// True when AUXSEG_DETERMINISTIC is set to a value other than "" or "0".
bool deterministic_mode();

}  // namespace auxseg::cli
