#include "viewvr/teleopd/bridge.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cctype>

#include <json.hpp>

namespace viewvr::bridge {

using nlohmann::json;

namespace {

struct Missing {
    std::string field;
};

const json& field(const json& j, const char* name) {
    const auto it = j.find(name);
    if (it == j.end()) throw Missing{name};
    return *it;
}

double num(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number()) throw BridgeError{"InvalidField", std::string(name) + " must be a number"};
    return v.get<double>();
}

std::array<double, 2> parse_rp(const json& j) { return {num(j, "roll"), num(j, "pitch")}; }

geom::Pose parse_pose(const json& j) {
    const json& p = field(j, "pose");
    const json& pos = field(p, "position");
    const json& ori = field(p, "orientation");
    if (!pos.is_array() || pos.size() != 3 || !ori.is_array() || ori.size() != 4) {
        throw BridgeError{"InvalidField", "pose needs position[3] and orientation[w,x,y,z]"};
    }
    for (const json& v : pos) if (!v.is_number()) throw BridgeError{"InvalidField", "pose.position must be numbers"};
    for (const json& v : ori) if (!v.is_number()) throw BridgeError{"InvalidField", "pose.orientation must be numbers"};
    return {{pos[0].get<double>(), pos[1].get<double>(), pos[2].get<double>()},
            {ori[0].get<double>(), ori[1].get<double>(), ori[2].get<double>(), ori[3].get<double>()}};
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

json status_json(std::uint8_t b) {
    const auto s = proto::Status::unpack(b);
    if (!s) return nullptr;
    return {{"latched", s->latched},
            {"reason", to_string(s->reason)},
            {"head", to_string(s->head)},
            {"camera", retarget::to_string(s->camera)},
            {"byte", b}};
}

} // namespace

Parsed parse_line(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception&) {
        return BridgeError{"BadJson", "line is not a JSON object"};
    }
    if (!j.is_object()) return BridgeError{"BadJson", "line is not a JSON object"};
    try {
        const json& t = field(j, "type");
        if (!t.is_string()) return BridgeError{"UnknownType", "type must be a string"};
        const auto type = proto::msg_type_from_string(t.get<std::string>());
        if (!type) return BridgeError{"UnknownType", "unknown message type '" + t.get<std::string>() + "'"};

        proto::Message m;
        const json& seq = field(j, "seq");
        if (!seq.is_number_unsigned() || seq.get<std::uint64_t>() > 0xffffffffull) {
            return BridgeError{"InvalidField", "seq must be an unsigned 32-bit integer"};
        }
        m.seq = seq.get<std::uint32_t>();
        if (const auto ts = j.find("timestamp_us"); ts != j.end()) {
            if (!ts->is_number_unsigned()) return BridgeError{"InvalidField", "timestamp_us must be unsigned"};
            m.timestamp_us = ts->get<std::uint64_t>();
        }
        switch (*type) {
            case proto::MsgType::ArmTarget: m.payload = proto::ArmTarget{parse_pose(j)}; break;
            case proto::MsgType::HeadTarget: {
                const auto rp = parse_rp(j);
                m.payload = proto::HeadTarget{rp[0], rp[1]};
                break;
            }
            case proto::MsgType::GripperCmd: {
                proto::GripperCmd g;
                g.aperture = num(j, "aperture");
                const json& c = field(j, "camera");
                const auto cam = c.is_string() ? retarget::camera_from_string(lower(c.get<std::string>())) : std::nullopt;
                if (!cam) return BridgeError{"InvalidField", "camera must be \"wrist\" or \"head\""};
                g.camera = *cam;
                m.payload = g;
                break;
            }
            case proto::MsgType::EStop: {
                proto::EStop e;
                if (const auto r = j.find("reason"); r != j.end()) {
                    const auto reason = r->is_string() ? proto::stop_reason_from_string(r->get<std::string>()) : std::nullopt;
                    if (!reason) return BridgeError{"InvalidField", "unknown stop reason"};
                    e.reason = *reason;
                }
                if (const auto rel = j.find("release"); rel != j.end()) {
                    if (!rel->is_boolean()) return BridgeError{"InvalidField", "release must be a boolean"};
                    if (rel->get<bool>()) m.flags |= proto::kFlagRelease;
                }
                m.payload = e;
                break;
            }
            case proto::MsgType::Heartbeat: m.payload = proto::Heartbeat{}; break;
            case proto::MsgType::Telemetry:
                return BridgeError{"NotAllowed", "Telemetry only flows from the robot"};
        }
        if (const auto bad = proto::validate(m.payload)) return BridgeError{"InvalidField", std::string(*bad)};
        return m;
    } catch (const Missing& e) {
        return BridgeError{"MissingField", "missing field '" + e.field + "'"};
    } catch (const BridgeError& e) {
        return e;
    }
}

std::string to_line(const proto::Message& m) {
    json j;
    j["type"] = to_string(m.type());
    j["seq"] = m.seq;
    j["timestamp_us"] = m.timestamp_us;
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, proto::ArmTarget>) {
                const auto& x = p.pose.position;
                const auto& q = p.pose.orientation;
                j["pose"] = {{"position", {x.x, x.y, x.z}}, {"orientation", {q.w, q.x, q.y, q.z}}};
            } else if constexpr (std::is_same_v<T, proto::HeadTarget>) {
                j["roll"] = p.roll;
                j["pitch"] = p.pitch;
            } else if constexpr (std::is_same_v<T, proto::GripperCmd>) {
                j["aperture"] = p.aperture;
                j["camera"] = retarget::to_string(p.camera);
            } else if constexpr (std::is_same_v<T, proto::Telemetry>) {
                j["joints"] = p.joints;
                j["roll"] = p.roll;
                j["pitch"] = p.pitch;
                j["aperture"] = p.aperture;
                j["status"] = status_json(p.status);
            } else if constexpr (std::is_same_v<T, proto::EStop>) {
                j["reason"] = to_string(p.reason);
                j["release"] = (m.flags & proto::kFlagRelease) != 0;
            }
        },
        m.payload);
    return j.dump();
}

std::string error_line(const BridgeError& e) {
    return json{{"type", "Error"}, {"error", e.error}, {"detail", e.detail}}.dump();
}

std::string hello_line(const HelloInfo& h) {
    json dh = json::array();
    for (const auto& d : h.dh.joints) dh.push_back({{"a", d.a}, {"d", d.d}, {"alpha", d.alpha}});
    json lim = json::array();
    for (int i = 0; i < kin::kJoints; ++i) {
        lim.push_back({{"min", h.limits.min[i]}, {"max", h.limits.max[i]}, {"max_velocity", h.limits.max_velocity[i]}});
    }
    return json{{"type", "Hello"},
                {"dh", dh},
                {"limits", lim},
                {"command_port", h.command_port},
                {"telemetry_port", h.telemetry_port},
                {"telemetry_hz", 100}}
        .dump();
}

// --------------------------------------------------------------------------- WebSocket

std::string websocket_accept(std::string_view key) {
    const std::string s = std::string(key) + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
    unsigned char digest[SHA_DIGEST_LENGTH];
    SHA1(reinterpret_cast<const unsigned char*>(s.data()), s.size(), digest);
    unsigned char out[4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1];
    const int n = EVP_EncodeBlock(out, digest, SHA_DIGEST_LENGTH);
    return std::string(reinterpret_cast<const char*>(out), static_cast<std::size_t>(n));
}

std::optional<std::string> websocket_handshake(std::string_view request) {
    std::optional<std::string> key;
    bool upgrade = false;
    std::size_t pos = request.find("\r\n");
    if (pos == std::string_view::npos || request.substr(0, 4) != "GET ") return std::nullopt;
    while (pos != std::string_view::npos) {
        const std::size_t start = pos + 2;
        pos = request.find("\r\n", start);
        const std::string_view line = request.substr(start, pos == std::string_view::npos ? pos : pos - start);
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        const std::string name = lower(std::string(line.substr(0, colon)));
        std::string_view value = line.substr(colon + 1);
        while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
        while (!value.empty() && value.back() == ' ') value.remove_suffix(1);
        if (name == "sec-websocket-key") key = std::string(value);
        if (name == "upgrade" && lower(std::string(value)) == "websocket") upgrade = true;
    }
    if (!upgrade || !key) return std::nullopt;
    return "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
           "Sec-WebSocket-Accept: " +
           websocket_accept(*key) + "\r\n\r\n";
}

namespace {

std::string frame(std::uint8_t opcode, std::string_view payload) {
    std::string f;
    f.push_back(static_cast<char>(0x80 | opcode));
    const std::size_t n = payload.size();
    if (n < 126) {
        f.push_back(static_cast<char>(n));
    } else if (n < 65536) {
        f.push_back(static_cast<char>(126));
        f.push_back(static_cast<char>(n >> 8));
        f.push_back(static_cast<char>(n & 0xff));
    } else {
        f.push_back(static_cast<char>(127));
        for (int i = 7; i >= 0; --i) f.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> (8 * i)) & 0xff));
    }
    f.append(payload);
    return f;
}

} // namespace

std::string ws_text_frame(std::string_view payload) { return frame(0x1, payload); }
std::string ws_close_frame() { return frame(0x8, {}); }

std::string WsDecoder::take_replies() { return std::exchange(replies_, {}); }

std::vector<std::string> WsDecoder::feed(std::string_view bytes) {
    std::vector<std::string> out;
    buf_.append(bytes);
    for (;;) {
        if (closed_ || failed_ || buf_.size() < 2) break;
        const auto b0 = static_cast<std::uint8_t>(buf_[0]);
        const auto b1 = static_cast<std::uint8_t>(buf_[1]);
        const bool fin = b0 & 0x80;
        const std::uint8_t op = b0 & 0x0f;
        if (!(b1 & 0x80)) {  // clients must mask
            failed_ = true;
            break;
        }
        std::size_t at = 2;
        std::uint64_t n = b1 & 0x7f;
        if (n == 126) {
            if (buf_.size() < 4) break;
            n = (static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[2])) << 8) | static_cast<std::uint8_t>(buf_[3]);
            at = 4;
        } else if (n == 127) {
            if (buf_.size() < 10) break;
            n = 0;
            for (int i = 0; i < 8; ++i) n = (n << 8) | static_cast<std::uint8_t>(buf_[2 + i]);
            at = 10;
        }
        if (n > (1u << 20)) {
            failed_ = true;
            break;
        }
        if (buf_.size() < at + 4 + n) break;
        const std::string_view mask(buf_.data() + at, 4);
        std::string payload = buf_.substr(at + 4, n);
        for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<char>(payload[i] ^ mask[i % 4]);
        buf_.erase(0, at + 4 + n);

        switch (op) {
            case 0x0:
            case 0x1:
                partial_ += payload;
                if (fin) out.push_back(std::exchange(partial_, {}));
                break;
            case 0x8:
                closed_ = true;
                replies_ += ws_close_frame();
                break;
            case 0x9: replies_ += frame(0xA, payload); break;
            case 0xA: break;
            default: failed_ = true; break;
        }
    }
    return out;
}

} // namespace viewvr::bridge
