#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scorehub::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

// Runs one invocation of the `scorehub` tool. args excludes the program
// name. Output that a Makefile would redirect goes to `out`; progress and
// diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scorehub::cli
