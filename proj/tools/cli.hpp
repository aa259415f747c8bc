#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tsclust {

/// Entry point of the `tsclust` command. Returns the process exit code:
/// 0 success, 2 invalid input, 3 numerical failure.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

/// Same, with the arguments after the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tsclust
