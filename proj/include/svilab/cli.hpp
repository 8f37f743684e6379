#pragma once

// Command-line front end. Exit codes: 0 success, 2 malformed input, 3 solver
// abort (a diagnostics.json is written next to the other outputs), 4 the
// variational inequality failed.

#include <iosfwd>

namespace svilab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitMalformed = 2;
inline constexpr int kExitSolverAbort = 3;
inline constexpr int kExitInequality = 4;

/// Subcommands: convex, simulate, verify-svi, approx-demo, soc-stats.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace svilab
