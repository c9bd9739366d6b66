#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace mspa {

/// Runs one subcommand. `args` excludes the program name. Data written to
/// standard output goes to `out`; logs go to stderr.
/// Exit codes: 0 success, 1 usage error, 2 data or backend error.
int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout);

int run_cli(int argc, char** argv);

}  // namespace mspa
