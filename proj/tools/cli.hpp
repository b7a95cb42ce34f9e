#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cntm::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads "key = value" lines ('#' starts a comment) into "--key=value" flags.
std::vector<std::string> config_flags(const std::string& path);

}  // namespace cntm::cli
