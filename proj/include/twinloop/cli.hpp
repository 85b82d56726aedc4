#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace twinloop {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitTimeout = 2;
inline constexpr int kExitUsage = 64;

/// Bundled scenario directory (configured at build time).
std::filesystem::path default_scenario_dir();

/// Entry point behind the twinloop executable. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace twinloop
