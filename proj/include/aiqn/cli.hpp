#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace aiqn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;

/// Runs one command line (without the program name). Never throws; errors
/// become a message on `err` and an exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aiqn::cli
