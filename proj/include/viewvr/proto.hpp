#pragma once

// UDP datagram layout (all integers and floats little-endian):
//
//   offset  size  field
//   0       4     magic "VVR1"
//   4       1     msg_type
//   5       1     flags
//   6       4     seq (u32)
//   10      8     timestamp_us (u64, from session start)
//   18      n     payload (per type, fixed size)
//   18+n    4     crc32 (IEEE) of bytes [0, 18+n)

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <variant>
#include <vector>

#include "viewvr/geom.hpp"
#include "viewvr/retarget.hpp"

namespace viewvr::proto {

inline constexpr std::array<std::uint8_t, 4> kMagic{'V', 'V', 'R', '1'};
inline constexpr std::size_t kHeaderSize = 18;
inline constexpr std::size_t kCrcSize = 4;
inline constexpr std::size_t kMinDatagram = kHeaderSize + kCrcSize;
inline constexpr double kQuatTolerance = 1e-6;

inline constexpr std::uint16_t kDefaultCommandPort = 46001;
inline constexpr std::uint16_t kDefaultTelemetryPort = 46002;

enum class MsgType : std::uint8_t {
    ArmTarget = 0x01,
    HeadTarget = 0x02,
    GripperCmd = 0x03,
    Telemetry = 0x04,
    EStop = 0x05,
    Heartbeat = 0x06,
};

std::string_view to_string(MsgType t);
std::optional<MsgType> msg_type_from_string(std::string_view s);

/// E-stop causes, shared by the EStop payload and the telemetry status byte.
enum class StopReason : std::uint8_t {
    None = 0,
    LimitViolation = 1,
    SelfCollision = 2,
    Watchdog = 3,
    Operator = 4,
};
inline constexpr std::uint8_t kMaxStopReason = 4;

std::string_view to_string(StopReason r);
std::optional<StopReason> stop_reason_from_string(std::string_view s);

/// EStop flag: clear the latch instead of setting it.
inline constexpr std::uint8_t kFlagRelease = 0x01;

/// Coarse head controller phase as carried in telemetry.
enum class HeadPhase : std::uint8_t { Unhomed = 0, Homing = 1, Homed = 2, Faulted = 3 };

std::string_view to_string(HeadPhase p);

/// Telemetry status byte:
///   bit 0     e-stop latched
///   bits 1-3  StopReason
///   bits 4-5  HeadPhase
///   bit 6     active camera (0 wrist, 1 head)
///   bit 7     reserved, zero
struct Status {
    bool latched = false;
    StopReason reason = StopReason::None;
    HeadPhase head = HeadPhase::Unhomed;
    retarget::Camera camera = retarget::Camera::Wrist;

    bool operator==(const Status&) const = default;

    std::uint8_t pack() const;
    static std::optional<Status> unpack(std::uint8_t b);
};

struct ArmTarget {
    geom::Pose pose;
    bool operator==(const ArmTarget&) const = default;
};

struct HeadTarget {
    double roll = 0.0;
    double pitch = 0.0;
    bool operator==(const HeadTarget&) const = default;
};

struct GripperCmd {
    double aperture = 1.0;
    retarget::Camera camera = retarget::Camera::Wrist;
    bool operator==(const GripperCmd&) const = default;
};

struct Telemetry {
    std::array<double, 6> joints{};
    double roll = 0.0;
    double pitch = 0.0;
    double aperture = 1.0;
    std::uint8_t status = 0;
    bool operator==(const Telemetry&) const = default;
};

struct EStop {
    StopReason reason = StopReason::Operator;
    bool operator==(const EStop&) const = default;
};

struct Heartbeat {
    bool operator==(const Heartbeat&) const = default;
};

using Payload = std::variant<ArmTarget, HeadTarget, GripperCmd, Telemetry, EStop, Heartbeat>;

std::size_t payload_size(MsgType t);

struct Message {
    std::uint8_t flags = 0;
    std::uint32_t seq = 0;
    std::uint64_t timestamp_us = 0;
    Payload payload = Heartbeat{};

    MsgType type() const;
    bool operator==(const Message&) const = default;
};

class EncodeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class DecodeError : std::uint8_t { BadMagic, BadLength, BadCrc, UnknownType, InvalidField };

std::string_view to_string(DecodeError e);

struct Decoded {
    std::optional<Message> message;
    DecodeError error = DecodeError::BadLength;  // meaningful only without a message

    bool ok() const { return message.has_value(); }
};

std::uint32_t crc32(std::span<const std::uint8_t> data);

/// Field-range check shared by encode, decode and the console bridge.
/// Returns a description of the first bad field, or nothing.
std::optional<std::string_view> validate(const Payload& p);

std::vector<std::uint8_t> encode(const Message& m);
Decoded decode(std::span<const std::uint8_t> bytes);

enum class Freshness : std::uint8_t { Accept, Stale };

/// Last accepted seq per message type.
struct ChannelState {
    std::array<std::optional<std::uint32_t>, 256> last{};
};

/// Serial-number freshness: accept iff the channel is empty or
/// (seq - last) mod 2^32 lies in (0, 2^31).
Freshness accept_fresh(ChannelState& state, MsgType type, std::uint32_t seq);

} // namespace viewvr::proto
