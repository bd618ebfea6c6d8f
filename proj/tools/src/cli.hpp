#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ioest::cli {

/// Runs the ioest command line. Returns the process exit code; nothing is
/// written to std::cout or std::cerr directly.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ioest::cli
