#include "viewvr/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "viewvr/sim/metrics.hpp"

namespace viewvr::sim {

using proto::StopReason;

namespace {

std::int64_t to_us(double s) { return std::llround(s * 1e6); }

std::vector<std::int64_t> event_times(const std::vector<double>& s) {
    std::vector<std::int64_t> out;
    for (double t : s) out.push_back(to_us(t));
    return out;
}

constexpr std::uint64_t kDownlinkSalt = 0x9E3779B97F4A7C15ull;

robot::RobotConfig robot_config(const ScenarioScript& script, robot::RobotConfig cfg) {
    for (const auto& o : script.limits) {
        cfg.limits.min[o.joint] = o.min;
        cfg.limits.max[o.joint] = o.max;
    }
    cfg.arm_init = script.arm_init;
    cfg.head_homed = script.head_homed;
    cfg.head_start = script.head_start;
    cfg.watchdog_ms = script.watchdog_ms;
    cfg.motor_unconstrained = script.motor_unconstrained;
    return cfg;
}

} // namespace

World::World(const ScenarioScript& script, std::uint64_t seed, RunOptions options)
    : script_(script),
      opt_(std::move(options)),
      seed_(seed),
      end_us_(to_us(script.effective_duration())),
      net_(opt_.net.value_or(script.net)),
      uplink_(net_, seed),
      downlink_(net_, seed ^ kDownlinkSalt),
      robot_(robot_config(script, opt_.robot)) {
    if (opt_.replay != nullptr && !opt_.replay->empty()) end_us_ = std::max(end_us_, opt_.replay->back().t_us);
    const rec::OperatorSample first = input_at(0);
    cal_ = retarget::calibrate(first.hand, kin::fk(robot_.joints(), robot_.config().dh), first.head, script_.align,
                               script_.scale);
    toggle_us_ = event_times(script_.toggles);
    estop_us_ = event_times(script_.estops);
    reset_us_ = event_times(script_.resets);
}

rec::OperatorSample World::input_at(std::int64_t t_us) const {
    if (opt_.replay != nullptr) {
        const auto& v = *opt_.replay;
        if (v.empty()) return {};
        auto it = std::upper_bound(v.begin(), v.end(), t_us,
                                   [](std::int64_t t, const rec::OperatorSample& s) { return t < s.t_us; });
        const rec::OperatorSample& s = it == v.begin() ? v.front() : *(it - 1);
        return {t_us, s.hand, s.head, s.pinch};
    }
    const OperatorState s = interpolate(script_.keyframes, static_cast<double>(t_us) * 1e-6);
    return {t_us, s.hand, s.head, s.pinch};
}

bool World::paused(std::int64_t t_us) const {
    return std::any_of(script_.pauses.begin(), script_.pauses.end(),
                       [&](const Interval& p) { return t_us >= to_us(p.from) && t_us < to_us(p.to); });
}

void World::send(proto::Payload payload, std::uint8_t flags) {
    proto::Message m;
    m.flags = flags;
    m.timestamp_us = static_cast<std::uint64_t>(now_us_);
    m.payload = std::move(payload);
    m.seq = seq_[static_cast<std::size_t>(m.type())]++;
    uplink_.send(proto::encode(m), now_us_);
}

// ---------------------------------------------------------------------------

void World::step() {
    const rec::OperatorSample in = input_at(now_us_);
    operator_step(in);
    for (const Packet& p : uplink_.deliver(now_us_)) robot_receive(p);
    robot_.control(now_us_);
    if (!telemetry_sched_.tick(now_us_).empty()) send_telemetry();
    for (const Packet& p : downlink_.deliver(now_us_)) operator_receive(p);
    if (!sample_sched_.tick(now_us_).empty()) sample(in);
    robot_.advance(now_us_, kStepUs * 1e-6);
    now_us_ += kStepUs;
}

void World::operator_step(const rec::OperatorSample& in) {
    const double t = static_cast<double>(now_us_) * 1e-6;
    const bool quiet = paused(now_us_);

    for (; toggle_next_ < toggle_us_.size() && toggle_us_[toggle_next_] <= now_us_; ++toggle_next_) {
        gripper_ = retarget::toggle_camera(gripper_, t);
    }
    if (!arm_sched_.tick(now_us_).empty() && !quiet) {
        send(proto::ArmTarget{retarget::map_hand(cal_, in.hand)});
        send(proto::GripperCmd{retarget::map_pinch(in.pinch), gripper_.active_camera});
    }
    for (std::int64_t due : head_sched_.tick(now_us_)) {
        if (quiet) continue;
        const auto h = retarget::map_head(cal_, in.head, {}, script_.head_map);
        send(proto::HeadTarget{h.angles.roll, h.angles.pitch});
        head_emits_.push_back(due);
    }
    if (!heartbeat_sched_.tick(now_us_).empty() && !quiet) send(proto::Heartbeat{});
    for (; estop_next_ < estop_us_.size() && estop_us_[estop_next_] <= now_us_; ++estop_next_) {
        send(proto::EStop{StopReason::Operator});
    }
    for (; reset_next_ < reset_us_.size() && reset_us_[reset_next_] <= now_us_; ++reset_next_) {
        send(proto::EStop{StopReason::None}, proto::kFlagRelease);
    }
}

void World::robot_receive(const Packet& p) {
    const proto::Decoded d = proto::decode(p.bytes);
    if (!d.ok()) return;
    const proto::Message& m = *d.message;
    if (proto::accept_fresh(robot_channels_, m.type(), m.seq) == proto::Freshness::Stale) {
        uplink_.mark_stale();
        return;
    }
    const robot::Outcome o = robot_.apply(m, now_us_);
    const bool motion = m.type() == proto::MsgType::ArmTarget || m.type() == proto::MsgType::HeadTarget;
    if (motion && o == robot::Outcome::Applied) {
        latency_ms_.push_back(static_cast<double>(now_us_ - p.sent_us) * 1e-3);
    }
}

void World::send_telemetry() {
    proto::Message m;
    m.seq = telemetry_seq_++;
    m.timestamp_us = static_cast<std::uint64_t>(now_us_);
    m.payload = robot_.telemetry();
    downlink_.send(proto::encode(m), now_us_);
}

void World::operator_receive(const Packet& p) {
    const proto::Decoded d = proto::decode(p.bytes);
    if (!d.ok()) return;
    if (proto::accept_fresh(operator_channels_, d.message->type(), d.message->seq) == proto::Freshness::Stale) {
        downlink_.mark_stale();
    }
}

void World::sample(const rec::OperatorSample& in) {
    const double t = static_cast<double>(now_us_) * 1e-6;
    const geom::Pose intended = retarget::map_hand(cal_, in.hand);
    const geom::Pose ee = kin::fk(robot_.joints(), robot_.config().dh);
    ee_err_.push_back((ee.position - intended.position).norm());

    const auto want = retarget::map_head(cal_, in.head, {}, script_.head_map).angles;
    const auto ang = robot_.head_angles();
    head_err_.push_back(std::hypot(ang[0] - want.roll, ang[1] - want.pitch));

    while (goal_next_ < script_.goals.size()) {
        const Goal& g = script_.goals[goal_next_];
        if (t > g.by + 1e-9) {
            goal_results_.push_back({g.name, false, g.by});
            ++goal_next_;
            hold_since_.reset();
            continue;
        }
        bool ok = false;
        switch (g.kind) {
            case GoalKind::EePosition: ok = (ee.position - g.position).norm() <= g.tol; break;
            case GoalKind::EeTilt:
                ok = std::abs(geom::quat_angle_between(ee.orientation, cal_.ee_origin.orientation) - g.value) <= g.tol;
                break;
            case GoalKind::Aperture: ok = g.above ? robot_.aperture() >= g.value : robot_.aperture() <= g.value; break;
            case GoalKind::Head:
                ok = std::abs(ang[0] - g.head.roll) <= g.tol && std::abs(ang[1] - g.head.pitch) <= g.tol;
                break;
            case GoalKind::Camera: ok = robot_.camera() == g.camera; break;
        }
        if (!ok) {
            hold_since_.reset();
            break;
        }
        if (!hold_since_) hold_since_ = t;
        if (t - *hold_since_ + 1e-9 < g.hold) break;
        goal_results_.push_back({g.name, true, t});
        ++goal_next_;
        hold_since_.reset();
    }

    if (opt_.on_frame) {
        rec::Frame f;
        f.t_us = now_us_;
        f.op_hand = in.hand;
        f.op_head = in.head;
        f.pinch = in.pinch;
        f.joints = robot_.joints().q;
        f.head = {ang[0], ang[1]};
        f.aperture = robot_.aperture();
        f.camera = robot_.camera();
        f.estop = robot_.latched();
        opt_.on_frame(f);
    }
}

MetricsReport World::report() const {
    MetricsReport r;
    r.scenario = script_.name;
    r.seed = seed_;
    r.net = net_;
    r.sim_duration_s = static_cast<double>(now_us_) * 1e-6;
    r.ee_rms_m = ee_err_.empty() ? 0.0 : rms(ee_err_);
    r.head_rms_rad = head_err_.empty() ? 0.0 : rms(head_err_);
    if (!latency_ms_.empty()) {
        r.latency_p50_ms = percentile(latency_ms_, 50.0);
        r.latency_p95_ms = percentile(latency_ms_, 95.0);
    }
    r.uplink = uplink_.stats();
    r.downlink = downlink_.stats();
    r.head_emissions = head_emits_.size();
    for (std::size_t i = 1; i < head_emits_.size(); ++i) {
        const std::int64_t d = head_emits_[i] - head_emits_[i - 1];
        r.head_spacing_min_us = i == 1 ? d : std::min(r.head_spacing_min_us, d);
        r.head_spacing_max_us = std::max(r.head_spacing_max_us, d);
    }
    r.ik_failures = robot_.ik_failures();
    r.blocked_while_latched = robot_.blocked();
    r.motion_after_latch = robot_.motion_after_latch();
    r.min_clearance_m = robot_.min_clearance();
    r.estops = robot_.estops();
    r.goals = goal_results_;
    for (std::size_t i = goal_next_; i < script_.goals.size(); ++i) {
        r.goals.push_back({script_.goals[i].name, false, script_.goals[i].by});
    }
    r.success = r.estops.empty() &&
                std::all_of(r.goals.begin(), r.goals.end(), [](const GoalResult& g) { return g.passed; });
    return r;
}

MetricsReport run_scenario(const ScenarioScript& script, std::uint64_t seed, const RunOptions& options) {
    World w(script, seed, options);
    while (!w.finished()) w.step();
    return w.report();
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string link_line(const LinkStats& s) {
    return "sent=" + std::to_string(s.sent) + " delivered=" + std::to_string(s.delivered) +
           " dropped=" + std::to_string(s.dropped) + " duplicated=" + std::to_string(s.duplicated) +
           " stale=" + std::to_string(s.stale) + " in_flight=" + std::to_string(s.in_flight);
}

nlohmann::json link_json(const LinkStats& s) {
    return {{"sent", s.sent},           {"delivered", s.delivered}, {"dropped", s.dropped},
            {"duplicated", s.duplicated}, {"stale", s.stale},       {"in_flight", s.in_flight}};
}

} // namespace

std::string format_report(const MetricsReport& r) {
    std::string s;
    auto line = [&](const std::string& k, const std::string& v) { s += k + ": " + v + "\n"; };
    line("scenario", r.scenario);
    line("seed", std::to_string(r.seed));
    line("network", "latency_ms=" + fmt("%g", r.net.latency_ms) + " jitter_ms=" + fmt("%g", r.net.jitter_ms) +
                        " drop=" + fmt("%g", r.net.drop) + " dup=" + fmt("%g", r.net.duplicate));
    line("sim_duration_s", fmt("%.3f", r.sim_duration_s));
    line("ee_rms_m", fmt("%.9f", r.ee_rms_m));
    line("head_rms_rad", fmt("%.9f", r.head_rms_rad));
    line("latency_p50_ms", r.latency_p50_ms ? fmt("%.3f", *r.latency_p50_ms) : "n/a");
    line("latency_p95_ms", r.latency_p95_ms ? fmt("%.3f", *r.latency_p95_ms) : "n/a");
    line("uplink", link_line(r.uplink));
    line("downlink", link_line(r.downlink));
    line("head_emissions", std::to_string(r.head_emissions) + " spacing_us=" + std::to_string(r.head_spacing_min_us) +
                               ".." + std::to_string(r.head_spacing_max_us));
    line("ik_failures", std::to_string(r.ik_failures));
    line("min_clearance_m", fmt("%.6f", r.min_clearance_m));
    line("estop_events", std::to_string(r.estops.size()));
    for (const auto& e : r.estops) line("estop", "t=" + fmt("%.3f", e.t) + " reason=" + std::string(to_string(e.reason)));
    line("blocked_while_latched", std::to_string(r.blocked_while_latched));
    line("motion_after_latch", std::to_string(r.motion_after_latch));
    for (const auto& g : r.goals) {
        line("goal " + g.name, g.passed ? "pass t=" + fmt("%.3f", g.at) : "FAIL deadline=" + fmt("%.3f", g.at));
    }
    line("success", r.success ? "true" : "false");
    return s;
}

std::string report_json(const MetricsReport& r) {
    nlohmann::json j;
    j["scenario"] = r.scenario;
    j["seed"] = r.seed;
    j["network"] = {{"latency_ms", r.net.latency_ms},
                    {"jitter_ms", r.net.jitter_ms},
                    {"drop", r.net.drop},
                    {"dup", r.net.duplicate}};
    j["sim_duration_s"] = r.sim_duration_s;
    j["ee_rms_m"] = r.ee_rms_m;
    j["head_rms_rad"] = r.head_rms_rad;
    j["latency_p50_ms"] = r.latency_p50_ms ? nlohmann::json(*r.latency_p50_ms) : nlohmann::json(nullptr);
    j["latency_p95_ms"] = r.latency_p95_ms ? nlohmann::json(*r.latency_p95_ms) : nlohmann::json(nullptr);
    j["uplink"] = link_json(r.uplink);
    j["downlink"] = link_json(r.downlink);
    j["head_emissions"] = r.head_emissions;
    j["head_spacing_us"] = {r.head_spacing_min_us, r.head_spacing_max_us};
    j["ik_failures"] = r.ik_failures;
    j["min_clearance_m"] = r.min_clearance_m;
    j["estops"] = nlohmann::json::array();
    for (const auto& e : r.estops) j["estops"].push_back({{"t", e.t}, {"reason", to_string(e.reason)}});
    j["blocked_while_latched"] = r.blocked_while_latched;
    j["motion_after_latch"] = r.motion_after_latch;
    j["goals"] = nlohmann::json::array();
    for (const auto& g : r.goals) j["goals"].push_back({{"name", g.name}, {"passed", g.passed}, {"t", g.at}});
    j["success"] = r.success;
    return j.dump(2) + "\n";
}

} // namespace viewvr::sim
