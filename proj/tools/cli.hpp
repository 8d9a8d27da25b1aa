#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bayesbag::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_runtime = 3;

/// Runs the command line (args excludes the program name).  Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bayesbag::cli
