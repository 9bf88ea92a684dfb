#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace symlab {

enum ExitCode : int {
    kExitOk = 0,
    kExitParse = 2,
    kExitSolver = 3,
    kExitInvariant = 4,
};

/// Entry point of the `symlab` executable. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace symlab
