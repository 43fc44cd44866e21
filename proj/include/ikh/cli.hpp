#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ikh::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// Runs `ikh <subcommand> [flags]`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ikh::cli
