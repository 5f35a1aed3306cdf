#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace betaunc {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitInternal = 3,
};

/// Runs the command line (args exclude the program name). Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace betaunc
