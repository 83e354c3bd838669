#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace odor::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `odor` tool. args[0] is the program name. Errors are
/// reported on `err` as one line `error: <kind>: <message>`.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace odor::cli
