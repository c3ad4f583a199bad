#include "viewvr/sim/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace viewvr::sim {

using geom::deg_to_rad;

ScriptError::ScriptError(std::string source, int line, std::string field, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + field + ": " + what),
      source_(std::move(source)),
      line_(line),
      field_(std::move(field)) {}

namespace {

class Line {
public:
    Line(const std::string& source, int number, std::vector<std::string> tokens)
        : source_(source), number_(number), tokens_(std::move(tokens)) {}

    bool done() const { return pos_ >= tokens_.size(); }
    const std::string& peek() const { return tokens_[pos_]; }

    [[noreturn]] void fail(const std::string& field, const std::string& what) const {
        throw ScriptError(source_, number_, field, what);
    }

    std::string word(const std::string& field) {
        if (done()) fail(field, "missing value");
        return tokens_[pos_++];
    }

    double number(const std::string& field) {
        const std::string w = word(field);
        double v = 0.0;
        const char* first = w.data();
        if (!w.empty() && *first == '+') ++first;
        const auto [ptr, ec] = std::from_chars(first, w.data() + w.size(), v);
        if (ec != std::errc{} || ptr != w.data() + w.size() || !std::isfinite(v)) {
            fail(field, "not a number: '" + w + "'");
        }
        return v;
    }

    double positive(const std::string& field) {
        const double v = number(field);
        if (!(v > 0.0)) fail(field, "must be positive");
        return v;
    }

    double non_negative(const std::string& field) {
        const double v = number(field);
        if (v < 0.0) fail(field, "must not be negative");
        return v;
    }

    double probability(const std::string& field) {
        const double v = number(field);
        if (v < 0.0 || v > 1.0) fail(field, "must lie in [0, 1]");
        return v;
    }

    void expect(const std::string& keyword, const std::string& field) {
        const std::string w = word(field);
        if (w != keyword) fail(field, "expected '" + keyword + "', got '" + w + "'");
    }

    void finish() const {
        if (!done()) fail(tokens_[pos_], "unexpected token");
    }

    int number_line() const { return number_; }

private:
    const std::string& source_;
    int number_;
    std::vector<std::string> tokens_;
    std::size_t pos_ = 0;
};

geom::Quat rpy_deg(Line& l, const std::string& field) {
    const double r = l.number(field + ".roll");
    const double p = l.number(field + ".pitch");
    const double y = l.number(field + ".yaw");
    return geom::from_roll_pitch(deg_to_rad(r), deg_to_rad(p), deg_to_rad(y));
}

void parse_keyframe(Line& l, ScenarioScript& s) {
    Keyframe k = s.keyframes.empty() ? Keyframe{} : s.keyframes.back();
    k.t = l.non_negative("keyframe.t");
    if (s.keyframes.empty() && k.t != 0.0) l.fail("keyframe.t", "first keyframe must be at t = 0");
    if (!s.keyframes.empty() && !(k.t > s.keyframes.back().t)) {
        l.fail("keyframe.t", "keyframe times must be strictly increasing");
    }
    while (!l.done()) {
        const std::string key = l.word("keyframe");
        if (key == "hand") {
            k.hand.position = {l.number("hand.x"), l.number("hand.y"), l.number("hand.z")};
        } else if (key == "rpy") {
            k.hand.orientation = rpy_deg(l, "rpy");
        } else if (key == "head") {
            k.head = rpy_deg(l, "head");
        } else if (key == "pinch") {
            k.pinch = l.number("pinch");
        } else {
            l.fail(key, "unknown keyframe field");
        }
    }
    s.keyframes.push_back(k);
}

void parse_goal(Line& l, ScenarioScript& s) {
    Goal g;
    g.line = l.number_line();
    g.name = l.word("goal.name");
    const std::string kind = l.word("goal.kind");
    if (kind == "ee") {
        g.kind = GoalKind::EePosition;
        g.position = {l.number("ee.x"), l.number("ee.y"), l.number("ee.z")};
        l.expect("tol", "ee.tol");
        g.tol = l.positive("ee.tol");
    } else if (kind == "ee_tilt") {
        g.kind = GoalKind::EeTilt;
        g.value = deg_to_rad(l.number("ee_tilt.angle"));
        l.expect("tol", "ee_tilt.tol");
        g.tol = deg_to_rad(l.positive("ee_tilt.tol"));
    } else if (kind == "aperture") {
        g.kind = GoalKind::Aperture;
        const std::string dir = l.word("aperture.direction");
        if (dir != "above" && dir != "below") l.fail("aperture.direction", "expected 'above' or 'below'");
        g.above = dir == "above";
        g.value = l.number("aperture.value");
        if (g.value < 0.0 || g.value > 1.0) l.fail("aperture.value", "must lie in [0, 1]");
    } else if (kind == "head") {
        g.kind = GoalKind::Head;
        g.head = {deg_to_rad(l.number("head.roll")), deg_to_rad(l.number("head.pitch"))};
        l.expect("tol", "head.tol");
        g.tol = deg_to_rad(l.positive("head.tol"));
    } else if (kind == "camera") {
        g.kind = GoalKind::Camera;
        const auto cam = retarget::camera_from_string(l.word("camera"));
        if (!cam) l.fail("camera", "expected 'wrist' or 'head'");
        g.camera = *cam;
    } else {
        l.fail("goal.kind", "unknown goal kind '" + kind + "'");
    }
    l.expect("by", "goal.by");
    g.by = l.non_negative("goal.by");
    if (!l.done()) {
        l.expect("hold", "goal.hold");
        g.hold = l.non_negative("goal.hold");
    }
    s.goals.push_back(g);
}

void parse_line(Line& l, ScenarioScript& s) {
    const std::string key = l.word("directive");
    if (key == "name") {
        s.name = l.word("name");
    } else if (key == "seed") {
        const std::string w = l.word("seed");
        const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), s.seed);
        if (ec != std::errc{} || ptr != w.data() + w.size()) l.fail("seed", "not an unsigned integer");
    } else if (key == "duration") {
        s.duration = l.positive("duration");
    } else if (key == "net") {
        while (!l.done()) {
            const std::string f = l.word("net");
            if (f == "latency") s.net.latency_ms = l.non_negative("net.latency");
            else if (f == "jitter") s.net.jitter_ms = l.non_negative("net.jitter");
            else if (f == "drop") s.net.drop = l.probability("net.drop");
            else if (f == "dup") s.net.duplicate = l.probability("net.dup");
            else l.fail("net." + f, "unknown network field");
        }
    } else if (key == "arm_init") {
        for (int i = 0; i < kin::kJoints; ++i) {
            s.arm_init[i] = deg_to_rad(l.number("arm_init.q" + std::to_string(i + 1)));
        }
    } else if (key == "head_init") {
        const std::string mode = l.word("head_init");
        if (mode == "homed") {
            s.head_homed = true;
        } else if (mode == "unhomed") {
            s.head_homed = false;
            s.head_start = {deg_to_rad(l.number("head_init.roll")), deg_to_rad(l.number("head_init.pitch"))};
        } else {
            l.fail("head_init", "expected 'homed' or 'unhomed'");
        }
    } else if (key == "limits") {
        const std::string joint = l.word("limits.joint");
        int j = 0;
        if (joint.size() != 6 || joint.rfind("joint", 0) != 0 || joint[5] < '1' || joint[5] > '6') {
            l.fail("limits.joint", "expected joint1..joint6");
        }
        j = joint[5] - '1';
        JointRangeOverride o{j, deg_to_rad(l.number("limits.min")), deg_to_rad(l.number("limits.max"))};
        if (!(o.min < o.max)) l.fail("limits.max", "must exceed min");
        s.limits.push_back(o);
    } else if (key == "align") {
        s.align = rpy_deg(l, "align");
    } else if (key == "scale") {
        s.scale = l.positive("scale");
    } else if (key == "head_map") {
        const std::string m = l.word("head_map");
        if (m == "rollpitch") s.head_map = geom::HeadChannelMap::RollPitch;
        else if (m == "yawpitch") s.head_map = geom::HeadChannelMap::YawPitch;
        else l.fail("head_map", "expected 'rollpitch' or 'yawpitch'");
    } else if (key == "motor") {
        l.expect("unconstrained", "motor");
        s.motor_unconstrained = true;
    } else if (key == "watchdog") {
        s.watchdog_ms = l.positive("watchdog");
    } else if (key == "keyframe") {
        parse_keyframe(l, s);
    } else if (key == "toggle") {
        s.toggles.push_back(l.non_negative("toggle.t"));
    } else if (key == "pause") {
        Interval iv{l.non_negative("pause.from"), l.non_negative("pause.to")};
        if (!(iv.to > iv.from)) l.fail("pause.to", "must be after pause.from");
        s.pauses.push_back(iv);
    } else if (key == "estop") {
        s.estops.push_back(l.non_negative("estop.t"));
    } else if (key == "reset") {
        s.resets.push_back(l.non_negative("reset.t"));
    } else if (key == "goal") {
        parse_goal(l, s);
    } else {
        l.fail(key, "unknown directive");
    }
    l.finish();
}

} // namespace

ScenarioScript parse_scenario(std::istream& in, const std::string& source) {
    ScenarioScript s;
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream words(raw);
        std::vector<std::string> tokens;
        for (std::string w; words >> w;) tokens.push_back(w);
        if (tokens.empty()) continue;
        Line l(source, number, std::move(tokens));
        parse_line(l, s);
    }
    if (s.keyframes.empty()) throw ScriptError(source, number, "keyframe", "script has no keyframes");
    for (auto* events : {&s.toggles, &s.estops, &s.resets}) std::sort(events->begin(), events->end());
    return s;
}

ScenarioScript load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario " + path.string());
    return parse_scenario(in, path.string());
}

double ScenarioScript::effective_duration() const {
    if (duration > 0.0) return duration;
    double end = keyframes.empty() ? 0.0 : keyframes.back().t;
    for (const auto& g : goals) end = std::max(end, g.by);
    for (const auto& p : pauses) end = std::max(end, p.to);
    for (const auto* events : {&toggles, &estops, &resets})
        for (double t : *events) end = std::max(end, t);
    return end + 1.0;
}

geom::Quat slerp(const geom::Quat& a, const geom::Quat& b0, double u) {
    geom::Quat b = b0;
    double d = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
    if (d < 0.0) {
        b = {-b.w, -b.x, -b.y, -b.z};
        d = -d;
    }
    double wa = 1.0 - u, wb = u;
    if (d < 0.9995) {
        const double theta = std::acos(std::min(d, 1.0));
        const double s = std::sin(theta);
        wa = std::sin((1.0 - u) * theta) / s;
        wb = std::sin(u * theta) / s;
    }
    return geom::quat_normalize(
        {wa * a.w + wb * b.w, wa * a.x + wb * b.x, wa * a.y + wb * b.y, wa * a.z + wb * b.z});
}

OperatorState interpolate(const std::vector<Keyframe>& keys, double t) {
    if (keys.empty()) return {};
    if (t <= keys.front().t) return {keys.front().hand, keys.front().head, keys.front().pinch};
    if (t >= keys.back().t) return {keys.back().hand, keys.back().head, keys.back().pinch};
    const auto hi = std::upper_bound(keys.begin(), keys.end(), t, [](double v, const Keyframe& k) { return v < k.t; });
    const Keyframe& b = *hi;
    const Keyframe& a = *(hi - 1);
    const double u = (t - a.t) / (b.t - a.t);
    OperatorState s;
    s.hand.position = a.hand.position + (b.hand.position - a.hand.position) * u;
    s.hand.orientation = slerp(a.hand.orientation, b.hand.orientation, u);
    s.head = slerp(a.head, b.head, u);
    s.pinch = a.pinch + (b.pinch - a.pinch) * u;
    return s;
}

} // namespace viewvr::sim
