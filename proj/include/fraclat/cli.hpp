#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fraclat {

/// Command-line entry point. args excludes the program name. Returns 0 on
/// success, 2 on configuration or usage errors, 3 on numerical failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fraclat
