#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace registrylint {

inline constexpr int kExitClean = 0;
inline constexpr int kExitFailuresFound = 1;
inline constexpr int kExitFatal = 2;

/// Runs one command line (without the program name). Diagnostics and progress go to `err`,
/// machine-readable results to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace registrylint
