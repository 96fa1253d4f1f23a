#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pdmp {

/// Exit codes of the pdmp driver.
enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitConfig = 2, kExitModel = 3, kExitRuntime = 4 };

/// Runs the driver on argv-style arguments (without the program name).
/// Reports go to out, diagnostics to err; files go to --out or output.dir.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pdmp
