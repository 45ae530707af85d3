#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace evogan {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitAborted = 3 };

/// Entry point of the evogan tool; args exclude the program name.
int run_cli(const std::vector<std::string> &args);

/// out/<YYYYmmdd-HHMMSS>, suffixed with -1, -2, ... when taken.
std::filesystem::path timestamped_directory(const std::filesystem::path &root);

} // namespace evogan
