#pragma once

#include <iosfwd>

namespace kgrec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Runs the `kgrec` command line. Normal output goes to `out`, diagnostics
// and usage errors to `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kgrec::cli
