#include "viewvr/robot.hpp"

#include <algorithm>
#include <cmath>

namespace viewvr::robot {

using proto::StopReason;

Robot::Robot(const RobotConfig& cfg)
    : cfg_(cfg),
      q_(cfg.arm_init),
      q_target_(cfg.arm_init),
      plant_(cfg.head_limits, cfg.head_plant,
             cfg.head_homed ? std::array<double, 2>{0.0, 0.0}
                            : std::array<double, 2>{cfg.head_start.roll, cfg.head_start.pitch}) {
    if (cfg_.head_homed) head_state_.fsm = head::Phase::Homed;
    min_clearance_ = kin::collision_report(q_, cfg_.capsules, cfg_.dh).min_clearance;
}

Outcome Robot::apply(const proto::Message& m, std::int64_t now_us) {
    if (const auto* a = std::get_if<proto::ArmTarget>(&m.payload)) {
        feed_watchdog(now_us);
        if (latched_) {
            ++blocked_;
            return Outcome::Blocked;
        }
        return apply_arm(a->pose, now_us);
    }
    if (const auto* h = std::get_if<proto::HeadTarget>(&m.payload)) {
        if (latched_) {
            ++blocked_;
            return Outcome::Blocked;
        }
        head_target_ = cfg_.head_limits.clamp({h->roll, h->pitch});
        return Outcome::Applied;
    }
    if (const auto* g = std::get_if<proto::GripperCmd>(&m.payload)) {
        camera_ = g->camera;
        if (latched_) {
            ++blocked_;
            return Outcome::Blocked;
        }
        aperture_target_ = g->aperture;
        return Outcome::Applied;
    }
    if (const auto* e = std::get_if<proto::EStop>(&m.payload)) {
        if (m.flags & proto::kFlagRelease) {
            if (!latched_) return Outcome::Ignored;
            unlatch(now_us);
            return Outcome::Applied;
        }
        if (latched_) return Outcome::Ignored;
        latch(e->reason == StopReason::None ? StopReason::Operator : e->reason, now_us);
        return Outcome::Applied;
    }
    if (std::holds_alternative<proto::Heartbeat>(m.payload)) {
        feed_watchdog(now_us);
        return Outcome::Applied;
    }
    return Outcome::Ignored;
}

Outcome Robot::apply_arm(const geom::Pose& pose, std::int64_t now_us) {
    const kin::IkResult sol = kin::ik(pose, cfg_.dh);
    if (sol.solutions.empty()) {
        ++ik_failures_;
        return Outcome::Rejected;
    }
    const kin::JointConfig cmd = kin::unwrap_near(kin::select_solution(sol.solutions, q_), q_);
    // Screen the target before the plant sees it.
    if (!kin::check_limits(cmd, cfg_.limits).ok()) {
        latch(StopReason::LimitViolation, now_us);
        return Outcome::Rejected;
    }
    if (kin::self_collision(cmd, cfg_.capsules, cfg_.dh)) {
        latch(StopReason::SelfCollision, now_us);
        return Outcome::Rejected;
    }
    q_target_ = cmd;
    return Outcome::Applied;
}

void Robot::feed_watchdog(std::int64_t now_us) {
    watchdog_armed_ = true;
    last_fresh_us_ = now_us;
}

void Robot::control(std::int64_t now_us) {
    if (!latched_ && watchdog_armed_ && now_us - last_fresh_us_ > std::llround(cfg_.watchdog_ms * 1000.0)) {
        latch(StopReason::Watchdog, now_us);
    }

    const auto ticks = head_sched_.tick(now_us);
    if (latched_) return;
    if (head_state_.fsm != head::Phase::Homed) {
        const auto r = head::homing_step(head_state_, plant_.sensors(), cfg_.head_limits, 1e-3);
        head_state_ = r.state;
        head_cmd_ = r.command;
        return;
    }
    for (std::size_t i = 0; i < ticks.size(); ++i) {
        const auto r = head::track_step(head_state_, head_target_, cfg_.head_limits, kHeadControlPeriodUs * 1e-6);
        head_state_ = r.state;
        head_cmd_ = r.command;
    }
}

void Robot::advance(std::int64_t now_us, double dt) {
    if (latched_ && (q_target_ != q_ || head_cmd_.velocity[0] != 0.0 || head_cmd_.velocity[1] != 0.0 ||
                     aperture_target_ != aperture_)) {
        ++motion_after_latch_;
    }

    const double tau = cfg_.arm_plant.time_constant;
    for (std::size_t j = 0; j < kin::kJoints; ++j) {
        const double err = q_target_[j] - q_[j];
        double v = err / tau;
        if (!cfg_.motor_unconstrained) v = std::clamp(v, -cfg_.limits.max_velocity[j], cfg_.limits.max_velocity[j]);
        const double dq = v * dt;
        q_[j] = std::abs(dq) >= std::abs(err) ? q_target_[j] : q_[j] + dq;
    }
    plant_.step(head_cmd_, dt);
    const double da = cfg_.arm_plant.gripper_rate * dt;
    aperture_ += std::clamp(aperture_target_ - aperture_, -da, da);

    const kin::CollisionReport cr = kin::collision_report(q_, cfg_.capsules, cfg_.dh);
    min_clearance_ = std::min(min_clearance_, cr.min_clearance);
    if (latched_) return;
    if (!kin::check_limits(q_, cfg_.limits).ok()) {
        latch(StopReason::LimitViolation, now_us);
    } else if (cr.colliding) {
        latch(StopReason::SelfCollision, now_us);
    }
}

void Robot::latch(StopReason reason, std::int64_t now_us) {
    latched_ = true;
    estops_.push_back({static_cast<double>(now_us) * 1e-6, reason});
    q_target_ = q_;
    aperture_target_ = aperture_;
    head_cmd_ = {};
    head_state_.roll_vel = head_state_.pitch_vel = 0.0;
    if (head_state_.fsm == head::Phase::Homed) {
        const auto ang = plant_.angles();
        head_state_.roll = ang[0];
        head_state_.pitch = ang[1];
        head_target_ = {ang[0], ang[1]};
    }
}

void Robot::unlatch(std::int64_t now_us) {
    latched_ = false;
    last_fresh_us_ = now_us;
}

proto::Status Robot::status() const {
    proto::Status st;
    st.latched = latched_;
    st.reason = latched_ && !estops_.empty() ? estops_.back().reason : StopReason::None;
    switch (head_state_.fsm) {
        case head::Phase::Unhomed: st.head = proto::HeadPhase::Unhomed; break;
        case head::Phase::Homed: st.head = proto::HeadPhase::Homed; break;
        case head::Phase::Faulted: st.head = proto::HeadPhase::Faulted; break;
        default: st.head = proto::HeadPhase::Homing; break;
    }
    st.camera = camera_;
    return st;
}

proto::Telemetry Robot::telemetry() const {
    proto::Telemetry t;
    t.joints = q_.q;
    const auto ang = plant_.angles();
    t.roll = ang[0];
    t.pitch = ang[1];
    t.aperture = aperture_;
    t.status = status().pack();
    return t;
}

} // namespace viewvr::robot
