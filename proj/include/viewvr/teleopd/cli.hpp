#pragma once

#include <ostream>

#include "viewvr/teleopd/service.hpp"

namespace viewvr::teleopd {

// Exit codes (sysexits.h values where one fits).
inline constexpr int kExitOk = 0;
inline constexpr int kExitGoalFailure = 2;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitDataError = 65;
inline constexpr int kExitNoInput = 66;
inline constexpr int kExitUnavailable = 69;
inline constexpr int kExitSoftware = 70;

/// The `viewvr` command line. `lookup` supplies environment variables.
int cli_run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const EnvLookup& lookup);

} // namespace viewvr::teleopd
