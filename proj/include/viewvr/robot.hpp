#pragma once

// Robot side of the link: safety supervisor, IK on incoming arm targets, head
// controller and the simulated arm, head and gripper plants. Shared by the
// deterministic world and the live service. Freshness filtering is the
// caller's job; apply() sees only accepted messages.

#include <array>
#include <cstdint>
#include <vector>

#include "viewvr/headctl.hpp"
#include "viewvr/kinematics.hpp"
#include "viewvr/proto.hpp"
#include "viewvr/retarget.hpp"

namespace viewvr::robot {

inline constexpr std::int64_t kHeadControlPeriodUs = 10'000;

struct ArmPlantConfig {
    double time_constant = 0.05;  // s
    double gripper_rate = 2.0;    // aperture units per s
};

struct RobotConfig {
    kin::DHParams dh = kin::DHParams::ur3();
    kin::JointLimits limits = kin::JointLimits::ur3();
    kin::CapsuleModel capsules = kin::CapsuleModel::ur_default();
    head::MotorLimits head_limits;
    head::PlantConfig head_plant;
    ArmPlantConfig arm_plant;
    kin::JointConfig arm_init{{0.0, -geom::kPi / 2, geom::kPi / 2, -geom::kPi / 2, -geom::kPi / 2, 0.0}};
    bool head_homed = true;
    geom::RollPitch head_start;  // plant angles when starting unhomed
    double watchdog_ms = 250.0;
    bool motor_unconstrained = false;  // drop the per-joint velocity clamp
};

struct StopEvent {
    double t = 0.0;  // s
    proto::StopReason reason = proto::StopReason::None;

    bool operator==(const StopEvent&) const = default;
};

enum class Outcome : std::uint8_t {
    Applied,    // state changed as commanded
    Blocked,    // motion command refused while latched
    Rejected,   // no IK solution, or the target tripped a latch
    Ignored,    // nothing to do (telemetry, duplicate release)
};

class Robot {
public:
    explicit Robot(const RobotConfig& cfg = {});

    Outcome apply(const proto::Message& m, std::int64_t now_us);
    /// Watchdog and head controller. Call once per 1 ms step, before advance().
    void control(std::int64_t now_us);
    /// Integrates the plants over dt and screens the resulting state.
    void advance(std::int64_t now_us, double dt);

    proto::Status status() const;
    proto::Telemetry telemetry() const;

    const RobotConfig& config() const { return cfg_; }
    const kin::JointConfig& joints() const { return q_; }
    const kin::JointConfig& joint_target() const { return q_target_; }
    std::array<double, 2> head_angles() const { return plant_.angles(); }
    const head::HeadState& head_state() const { return head_state_; }
    const geom::RollPitch& head_target() const { return head_target_; }
    double aperture() const { return aperture_; }
    retarget::Camera camera() const { return camera_; }
    bool latched() const { return latched_; }
    const std::vector<StopEvent>& estops() const { return estops_; }
    std::uint64_t ik_failures() const { return ik_failures_; }
    std::uint64_t blocked() const { return blocked_; }
    std::uint64_t motion_after_latch() const { return motion_after_latch_; }
    double min_clearance() const { return min_clearance_; }

private:
    Outcome apply_arm(const geom::Pose& pose, std::int64_t now_us);
    void latch(proto::StopReason reason, std::int64_t now_us);
    void unlatch(std::int64_t now_us);
    void feed_watchdog(std::int64_t now_us);

    RobotConfig cfg_;
    bool latched_ = false;
    bool watchdog_armed_ = false;
    std::int64_t last_fresh_us_ = 0;
    kin::JointConfig q_;
    kin::JointConfig q_target_;
    head::HeadState head_state_;
    head::HeadPlant plant_;
    head::MotorCommand head_cmd_;
    geom::RollPitch head_target_;
    head::FixedRateScheduler head_sched_{kHeadControlPeriodUs};
    double aperture_ = 1.0;
    double aperture_target_ = 1.0;
    retarget::Camera camera_ = retarget::Camera::Wrist;

    std::vector<StopEvent> estops_;
    std::uint64_t ik_failures_ = 0;
    std::uint64_t blocked_ = 0;
    std::uint64_t motion_after_latch_ = 0;
    double min_clearance_ = 0.0;
};

} // namespace viewvr::robot
