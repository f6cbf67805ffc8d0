#pragma once

// Command-line surface. Exit codes:
//   0 success, 1 I/O or unexpected failure, 2 invalid input or usage,
//   3 singular stiffness (unsupported load path), 4 OC bisection failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace topoforge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitSingular = 3;
inline constexpr int kExitBisection = 4;

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace topoforge
