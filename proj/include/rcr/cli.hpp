#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rcr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the rcr-design command line tool. `args` excludes the
/// program name. Returns 0 on success, 2 on invalid input and 1 on internal
/// failure (including failed verification checks).
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace rcr
