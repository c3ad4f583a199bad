#include "viewvr/proto.hpp"

#include <bit>
#include <cmath>

namespace viewvr::proto {

namespace {

class Writer {
public:
    explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

private:
    std::vector<std::uint8_t>& out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    std::uint8_t u8() { return in_[pos_++]; }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_++]} << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_++]} << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

constexpr std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        t[i] = c;
    }
    return t;
}

constexpr auto kCrcTable = make_crc_table();

bool finite_all(std::initializer_list<double> xs) {
    for (double x : xs)
        if (!std::isfinite(x)) return false;
    return true;
}

bool valid_camera(retarget::Camera c) {
    return c == retarget::Camera::Wrist || c == retarget::Camera::Head;
}

bool known_type(std::uint8_t t) { return t >= 0x01 && t <= 0x06; }

} // namespace

std::string_view to_string(MsgType t) {
    switch (t) {
        case MsgType::ArmTarget: return "ArmTarget";
        case MsgType::HeadTarget: return "HeadTarget";
        case MsgType::GripperCmd: return "GripperCmd";
        case MsgType::Telemetry: return "Telemetry";
        case MsgType::EStop: return "EStop";
        case MsgType::Heartbeat: return "Heartbeat";
    }
    return "?";
}

std::optional<MsgType> msg_type_from_string(std::string_view s) {
    for (std::uint8_t t = 1; t <= 6; ++t) {
        if (to_string(static_cast<MsgType>(t)) == s) return static_cast<MsgType>(t);
    }
    return std::nullopt;
}

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::None: return "None";
        case StopReason::LimitViolation: return "LimitViolation";
        case StopReason::SelfCollision: return "SelfCollision";
        case StopReason::Watchdog: return "Watchdog";
        case StopReason::Operator: return "Operator";
    }
    return "?";
}

std::optional<StopReason> stop_reason_from_string(std::string_view s) {
    for (std::uint8_t r = 0; r <= kMaxStopReason; ++r) {
        if (to_string(static_cast<StopReason>(r)) == s) return static_cast<StopReason>(r);
    }
    return std::nullopt;
}

std::string_view to_string(HeadPhase p) {
    switch (p) {
        case HeadPhase::Unhomed: return "Unhomed";
        case HeadPhase::Homing: return "Homing";
        case HeadPhase::Homed: return "Homed";
        case HeadPhase::Faulted: return "Faulted";
    }
    return "?";
}

std::string_view to_string(DecodeError e) {
    switch (e) {
        case DecodeError::BadMagic: return "BadMagic";
        case DecodeError::BadLength: return "BadLength";
        case DecodeError::BadCrc: return "BadCrc";
        case DecodeError::UnknownType: return "UnknownType";
        case DecodeError::InvalidField: return "InvalidField";
    }
    return "?";
}

std::uint8_t Status::pack() const {
    return static_cast<std::uint8_t>((latched ? 1u : 0u) | (static_cast<unsigned>(reason) & 7u) << 1 |
                                     (static_cast<unsigned>(head) & 3u) << 4 |
                                     (camera == retarget::Camera::Head ? 1u : 0u) << 6);
}

std::optional<Status> Status::unpack(std::uint8_t b) {
    const unsigned reason = (b >> 1) & 7u;
    if ((b & 0x80u) != 0 || reason > kMaxStopReason) return std::nullopt;
    Status s;
    s.latched = (b & 1u) != 0;
    s.reason = static_cast<StopReason>(reason);
    s.head = static_cast<HeadPhase>((b >> 4) & 3u);
    s.camera = (b & 0x40u) != 0 ? retarget::Camera::Head : retarget::Camera::Wrist;
    return s;
}

std::size_t payload_size(MsgType t) {
    switch (t) {
        case MsgType::ArmTarget: return 56;
        case MsgType::HeadTarget: return 16;
        case MsgType::GripperCmd: return 9;
        case MsgType::Telemetry: return 73;
        case MsgType::EStop: return 1;
        case MsgType::Heartbeat: return 0;
    }
    return 0;
}

MsgType Message::type() const {
    return static_cast<MsgType>(payload.index() + 1);
}

std::uint32_t crc32(std::span<const std::uint8_t> data) {
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::uint8_t b : data) c = kCrcTable[(c ^ b) & 0xFFu] ^ (c >> 8);
    return ~c;
}

std::optional<std::string_view> validate(const Payload& p) {
    struct V {
        std::optional<std::string_view> operator()(const ArmTarget& m) const {
            const auto& q = m.pose.orientation;
            const auto& x = m.pose.position;
            if (!finite_all({x.x, x.y, x.z, q.w, q.x, q.y, q.z})) return "pose must be finite";
            if (std::abs(q.norm() - 1.0) > kQuatTolerance) return "orientation must be a unit quaternion";
            return std::nullopt;
        }
        std::optional<std::string_view> operator()(const HeadTarget& m) const {
            if (!finite_all({m.roll, m.pitch})) return "head angles must be finite";
            return std::nullopt;
        }
        std::optional<std::string_view> operator()(const GripperCmd& m) const {
            if (!(m.aperture >= 0.0 && m.aperture <= 1.0)) return "aperture must lie in [0, 1]";
            if (!valid_camera(m.camera)) return "camera must be 0 (wrist) or 1 (head)";
            return std::nullopt;
        }
        std::optional<std::string_view> operator()(const Telemetry& m) const {
            for (double j : m.joints)
                if (!std::isfinite(j)) return "joints must be finite";
            if (!finite_all({m.roll, m.pitch})) return "head angles must be finite";
            if (!(m.aperture >= 0.0 && m.aperture <= 1.0)) return "aperture must lie in [0, 1]";
            if (!Status::unpack(m.status)) return "status byte has reserved bits set";
            return std::nullopt;
        }
        std::optional<std::string_view> operator()(const EStop& m) const {
            if (static_cast<std::uint8_t>(m.reason) > kMaxStopReason) return "unknown stop reason";
            return std::nullopt;
        }
        std::optional<std::string_view> operator()(const Heartbeat&) const { return std::nullopt; }
    };
    return std::visit(V{}, p);
}

std::vector<std::uint8_t> encode(const Message& m) {
    if (const auto bad = validate(m.payload)) {
        throw EncodeError(std::string(to_string(m.type())) + ": " + std::string(*bad));
    }
    std::vector<std::uint8_t> out;
    out.reserve(kMinDatagram + payload_size(m.type()));
    Writer w(out);
    for (auto b : kMagic) w.u8(b);
    w.u8(static_cast<std::uint8_t>(m.type()));
    w.u8(m.flags);
    w.u32(m.seq);
    w.u64(m.timestamp_us);

    struct P {
        Writer& w;
        void operator()(const ArmTarget& a) const {
            const auto& p = a.pose.position;
            const auto& q = a.pose.orientation;
            for (double v : {p.x, p.y, p.z, q.w, q.x, q.y, q.z}) w.f64(v);
        }
        void operator()(const HeadTarget& h) const {
            w.f64(h.roll);
            w.f64(h.pitch);
        }
        void operator()(const GripperCmd& g) const {
            w.f64(g.aperture);
            w.u8(static_cast<std::uint8_t>(g.camera));
        }
        void operator()(const Telemetry& t) const {
            for (double j : t.joints) w.f64(j);
            w.f64(t.roll);
            w.f64(t.pitch);
            w.f64(t.aperture);
            w.u8(t.status);
        }
        void operator()(const EStop& e) const { w.u8(static_cast<std::uint8_t>(e.reason)); }
        void operator()(const Heartbeat&) const {}
    };
    std::visit(P{w}, m.payload);
    w.u32(crc32(out));
    return out;
}

Decoded decode(std::span<const std::uint8_t> bytes) {
    Decoded d;
    auto fail = [&](DecodeError e) {
        d.error = e;
        return d;
    };
    if (bytes.size() < kMinDatagram) return fail(DecodeError::BadLength);
    for (std::size_t i = 0; i < kMagic.size(); ++i)
        if (bytes[i] != kMagic[i]) return fail(DecodeError::BadMagic);

    const std::size_t body = bytes.size() - kCrcSize;
    Reader crc_reader(bytes.subspan(body));
    if (crc_reader.u32() != crc32(bytes.first(body))) return fail(DecodeError::BadCrc);

    Reader r(bytes.subspan(kMagic.size()));
    const std::uint8_t raw_type = r.u8();
    if (!known_type(raw_type)) return fail(DecodeError::UnknownType);
    const auto type = static_cast<MsgType>(raw_type);
    if (body - kHeaderSize != payload_size(type)) return fail(DecodeError::BadLength);

    Message m;
    m.flags = r.u8();
    m.seq = r.u32();
    m.timestamp_us = r.u64();
    switch (type) {
        case MsgType::ArmTarget: {
            ArmTarget a;
            a.pose.position = {r.f64(), r.f64(), r.f64()};
            a.pose.orientation = {r.f64(), r.f64(), r.f64(), r.f64()};
            m.payload = a;
            break;
        }
        case MsgType::HeadTarget: {
            HeadTarget h;
            h.roll = r.f64();
            h.pitch = r.f64();
            m.payload = h;
            break;
        }
        case MsgType::GripperCmd: {
            GripperCmd g;
            g.aperture = r.f64();
            const std::uint8_t cam = r.u8();
            if (cam > 1) return fail(DecodeError::InvalidField);
            g.camera = static_cast<retarget::Camera>(cam);
            m.payload = g;
            break;
        }
        case MsgType::Telemetry: {
            Telemetry t;
            for (double& j : t.joints) j = r.f64();
            t.roll = r.f64();
            t.pitch = r.f64();
            t.aperture = r.f64();
            t.status = r.u8();
            m.payload = t;
            break;
        }
        case MsgType::EStop: {
            const std::uint8_t reason = r.u8();
            if (reason > kMaxStopReason) return fail(DecodeError::InvalidField);
            m.payload = EStop{static_cast<StopReason>(reason)};
            break;
        }
        case MsgType::Heartbeat:
            m.payload = Heartbeat{};
            break;
    }
    if (validate(m.payload)) return fail(DecodeError::InvalidField);
    d.message = std::move(m);
    return d;
}

Freshness accept_fresh(ChannelState& state, MsgType type, std::uint32_t seq) {
    auto& last = state.last[static_cast<std::uint8_t>(type)];
    if (last) {
        const std::uint32_t delta = seq - *last;
        if (delta == 0 || delta >= 0x80000000u) return Freshness::Stale;
    }
    last = seq;
    return Freshness::Accept;
}

} // namespace viewvr::proto
