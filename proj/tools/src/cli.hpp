#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace phasor::cli {

// Runs the command line (without the program name). Returns the process exit
// code: 0 success, 1 validation error, 2 numeric or runtime error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace phasor::cli
