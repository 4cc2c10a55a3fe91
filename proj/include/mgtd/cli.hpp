// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mgtd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitCheckFailed = 3;

inline constexpr std::uint64_t kDefaultSeed = 42;

/// Runs one subcommand. `args` excludes the program name. Tables and logs go
/// to `out`, diagnostics to `err`; files are written only where a flag names
/// them.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mgtd::cli
