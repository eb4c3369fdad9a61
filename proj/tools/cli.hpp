#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mnig::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kFitFailure = 3,
  kSchemaError = 4,
};

/// Runs one command; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mnig::cli
