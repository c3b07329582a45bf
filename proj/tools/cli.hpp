#pragma once

#include <ostream>

namespace wasp::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 file-format error, 3 config error.
enum ExitCode : int { kOk = 0, kRuntime = 1, kFormat = 2, kConfig = 3 };

/// Runs the `wasp` command line. Reports go to files named by --out; tables
/// go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wasp::cli
