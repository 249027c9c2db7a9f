#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace metsize::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kValidation = 2,
  kGridExhausted = 3,
};

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace metsize::cli
