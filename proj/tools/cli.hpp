#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace beable::cli {

/// Runs one subcommand; `args` excludes the program name.
/// Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure, 1 otherwise.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace beable::cli
