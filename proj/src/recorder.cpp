#include "viewvr/recorder.hpp"

#include <json.hpp>

namespace viewvr::rec {

using nlohmann::json;

namespace {

json quat_json(const geom::Quat& q) { return json::array({q.w, q.x, q.y, q.z}); }

geom::Quat quat_from(const json& j) {
    if (!j.is_array() || j.size() != 4) throw std::invalid_argument("quaternion needs 4 numbers");
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

double number(const json& j) {
    if (!j.is_number()) throw std::invalid_argument("expected a number");
    return j.get<double>();
}

void check_order(std::size_t count, std::int64_t last, std::int64_t t) {
    if (count > 0 && t <= last) {
        throw OrderError("frame at t_us=" + std::to_string(t) + " does not follow t_us=" + std::to_string(last));
    }
}

} // namespace

ParseError::ParseError(int line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

void append(Session& session, const Frame& frame) {
    check_order(session.frames.size(), session.frames.empty() ? 0 : session.frames.back().t_us, frame.t_us);
    session.frames.push_back(frame);
}

std::string to_line(const Frame& f) {
    const auto& p = f.op_hand.position;
    json j;
    j["t_us"] = f.t_us;
    j["op_hand"] = {{"position", {p.x, p.y, p.z}}, {"orientation", quat_json(f.op_hand.orientation)}};
    j["op_head"] = quat_json(f.op_head);
    j["pinch"] = f.pinch;
    j["joints"] = f.joints;
    j["head"] = {{"roll", f.head.roll}, {"pitch", f.head.pitch}};
    j["aperture"] = f.aperture;
    j["camera"] = retarget::to_string(f.camera);
    j["estop"] = f.estop;
    return j.dump();
}

Frame from_line(const std::string& text, int line) {
    try {
        const json j = json::parse(text);
        Frame f;
        if (!j.at("t_us").is_number_integer()) throw std::invalid_argument("t_us must be an integer");
        f.t_us = j.at("t_us").get<std::int64_t>();
        const json& hand = j.at("op_hand");
        const json& hp = hand.at("position");
        if (!hp.is_array() || hp.size() != 3) throw std::invalid_argument("op_hand.position needs 3 numbers");
        f.op_hand.position = {number(hp.at(0)), number(hp.at(1)), number(hp.at(2))};
        f.op_hand.orientation = quat_from(hand.at("orientation"));
        f.op_head = quat_from(j.at("op_head"));
        f.pinch = number(j.at("pinch"));
        const json& q = j.at("joints");
        if (!q.is_array() || q.size() != 6) throw std::invalid_argument("joints needs 6 numbers");
        for (int i = 0; i < 6; ++i) f.joints[i] = number(q.at(i));
        f.head = {number(j.at("head").at("roll")), number(j.at("head").at("pitch"))};
        f.aperture = number(j.at("aperture"));
        const auto cam = retarget::camera_from_string(j.at("camera").get<std::string>());
        if (!cam) throw std::invalid_argument("unknown camera");
        f.camera = *cam;
        f.estop = j.at("estop").get<bool>();
        return f;
    } catch (const json::exception& e) {
        throw ParseError(line, e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(line, e.what());
    }
}

void save(const Session& s, const std::filesystem::path& path) {
    SessionWriter w(path);
    for (const auto& f : s.frames) w.append(f);
}

Session load(std::istream& in) {
    Session s;
    std::string text;
    int line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        const Frame f = from_line(text, line);
        try {
            append(s, f);
        } catch (const OrderError& e) {
            throw ParseError(line, e.what());
        }
    }
    return s;
}

Session load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open session " + path.string());
    return load(in);
}

std::vector<OperatorSample> replay(const Session& s) {
    std::vector<OperatorSample> out;
    out.reserve(s.frames.size());
    for (const auto& f : s.frames) out.push_back({f.t_us, f.op_hand, f.op_head, f.pinch});
    return out;
}

SessionWriter::SessionWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write session " + path.string());
}

void SessionWriter::append(const Frame& f) {
    check_order(count_, last_t_, f.t_us);
    out_ << to_line(f) << '\n';
    last_t_ = f.t_us;
    ++count_;
}

} // namespace viewvr::rec
