#pragma once

#include <string>
#include <vector>

namespace tsbcf::cli {

inline constexpr const char* kVersion = "tsbcf 0.1.0";

/// Runs the command line `args` (without the program name) and returns the exit code:
/// 0 success, 1 invalid input or configuration, 2 runtime failure.
int run(const std::vector<std::string>& args);

}  // namespace tsbcf::cli
