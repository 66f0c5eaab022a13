#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mlsolve::cli {

enum ExitCode { complete = 0, error = 1, partial = 2 };

/// Runs one command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace mlsolve::cli
