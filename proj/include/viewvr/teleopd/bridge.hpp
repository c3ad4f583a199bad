#pragma once

// Console bridge wire format: one JSON object per line mirroring the proto
// messages field for field, plus the WebSocket framing browsers need.
//
//   {"type":"HeadTarget","seq":3,"roll":0.1,"pitch":0.2}
//   {"type":"GripperCmd","seq":4,"aperture":0.5,"camera":"head"}
//   {"type":"EStop","seq":1,"reason":"Operator","release":false}
//
// Server to client: Hello once on connect, Telemetry at up to 100 Hz, Error
// replies to malformed client lines.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "viewvr/kinematics.hpp"
#include "viewvr/proto.hpp"

namespace viewvr::bridge {

struct BridgeError {
    std::string error;  // BadJson, UnknownType, MissingField, InvalidField, NotAllowed
    std::string detail;

    bool operator==(const BridgeError&) const = default;
};

using Parsed = std::variant<proto::Message, BridgeError>;

/// Client line -> message, validated with the same rules as the UDP decoder.
Parsed parse_line(std::string_view line);

/// Any message as a mirror line (no trailing newline).
std::string to_line(const proto::Message& m);

std::string error_line(const BridgeError& e);

struct HelloInfo {
    kin::DHParams dh;
    kin::JointLimits limits;
    std::uint16_t command_port = 0;
    std::uint16_t telemetry_port = 0;
};

std::string hello_line(const HelloInfo& h);

// --------------------------------------------------------------------------- WebSocket

/// Sec-WebSocket-Accept value for a client key.
std::string websocket_accept(std::string_view key);

/// Builds the 101 response for an upgrade request, or nothing if `request`
/// is not a WebSocket upgrade.
std::optional<std::string> websocket_handshake(std::string_view request);

/// Unmasked server text frame.
std::string ws_text_frame(std::string_view payload);
std::string ws_close_frame();

/// Incremental decoder for masked client frames. Text payloads come out
/// whole; pings are answered through `pending_replies`.
class WsDecoder {
public:
    /// Appends bytes, returns complete text messages.
    std::vector<std::string> feed(std::string_view bytes);

    bool closed() const { return closed_; }
    bool failed() const { return failed_; }
    std::string take_replies();

private:
    std::string buf_;
    std::string partial_;
    std::string replies_;
    bool closed_ = false;
    bool failed_ = false;
};

} // namespace viewvr::bridge
