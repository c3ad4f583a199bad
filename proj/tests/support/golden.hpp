#pragma once

// Encoded datagrams shared by the protocol tests and the acceptance run.

namespace golden {

// Reference vectors assembled outside this code base (Python struct + zlib.crc32).
inline constexpr const char* kHeartbeat = "565652310600000000000000000000000000b9c80dd2";
inline constexpr const char* kHeadZero = "56565231020007000000e80300000000000000000000000000000000000000000000fef6476d";
inline constexpr const char* kArm =
    "565652310100040302018877665544332211000000000000d03f000000000000e0bf000000000000c03fa1ee7d9f5401ef3f"
    "000000000000000000000000000000007715f3d4eeaacf3fdc930647";
inline constexpr const char* kGripper = "5656523103002a000000204e000000000000000000000000e83f01832d0af0";
inline constexpr const char* kTelemetry =
    "565652310400ffffffff15cd5b07000000009a9999999999b93f000000000000f8bf0000000000000040000000000000d0bf"
    "182d4454fb21f93f00000000000008c09a9999999999c93f9a9999999999b9bf000000000000e03f254f268d5c";
inline constexpr const char* kEStop = "565652310501090000000500000000000000037f7c14b8";

} // namespace golden
