#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace tag {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitFormat = 3;
inline constexpr int kExitParameter = 4;

int exit_code_for(const std::exception& e);

/// Runs the `tag` command line. `args` excludes the program name. Normal
/// output goes to `out`, warnings and errors to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tag
