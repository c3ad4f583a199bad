#pragma once

// Deterministic 1 ms world: operator side (retarget + schedulers), a lossy
// link each way, robot side (freshness, IK, safety supervisor, plants) and the
// metrics collected along the way.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "viewvr/headctl.hpp"
#include "viewvr/kinematics.hpp"
#include "viewvr/proto.hpp"
#include "viewvr/recorder.hpp"
#include "viewvr/retarget.hpp"
#include "viewvr/robot.hpp"
#include "viewvr/sim/network.hpp"
#include "viewvr/sim/scenario.hpp"

namespace viewvr::sim {

inline constexpr std::int64_t kStepUs = 1000;
inline constexpr std::int64_t kArmPeriodUs = 20'000;        // 50 Hz
inline constexpr std::int64_t kHeadPeriodUs = 10'000;       // 100 Hz
inline constexpr std::int64_t kHeartbeatPeriodUs = 100'000; // 10 Hz
inline constexpr std::int64_t kTelemetryPeriodUs = 10'000;
inline constexpr std::int64_t kSamplePeriodUs = 10'000;

struct RunOptions {
    std::optional<NetworkModel> net;  // replaces the script's network block
    /// Recorded operator inputs, held between samples, instead of the keyframes.
    const std::vector<rec::OperatorSample>* replay = nullptr;
    std::function<void(const rec::Frame&)> on_frame;
    /// Arm, head and supervisor settings; the script's arm/head start, limit
    /// overrides, watchdog and motor flag are applied on top.
    robot::RobotConfig robot;
};

struct GoalResult {
    std::string name;
    bool passed = false;
    double at = 0.0;  // s; pass time, or the deadline on failure

    bool operator==(const GoalResult&) const = default;
};

using EStopEvent = robot::StopEvent;

struct MetricsReport {
    std::string scenario;
    std::uint64_t seed = 0;
    NetworkModel net;
    double sim_duration_s = 0.0;
    double ee_rms_m = 0.0;
    double head_rms_rad = 0.0;
    std::optional<double> latency_p50_ms;
    std::optional<double> latency_p95_ms;
    LinkStats uplink;
    LinkStats downlink;
    std::uint64_t head_emissions = 0;
    std::int64_t head_spacing_min_us = 0;
    std::int64_t head_spacing_max_us = 0;
    std::uint64_t ik_failures = 0;
    std::uint64_t blocked_while_latched = 0;
    std::uint64_t motion_after_latch = 0;
    double min_clearance_m = 0.0;
    std::vector<EStopEvent> estops;
    std::vector<GoalResult> goals;
    bool success = false;

    bool operator==(const MetricsReport&) const = default;
};

/// Human- and machine-readable "key: value" lines, stable across runs.
std::string format_report(const MetricsReport& r);
std::string report_json(const MetricsReport& r);

class World {
public:
    World(const ScenarioScript& script, std::uint64_t seed, RunOptions options = {});

    /// Advances the clock by exactly 1 ms.
    void step();
    bool finished() const { return now_us_ > end_us_; }
    MetricsReport report() const;

    std::int64_t now_us() const { return now_us_; }
    const robot::Robot& robot() const { return robot_; }
    const std::vector<std::int64_t>& head_emission_times() const { return head_emits_; }
    const retarget::Calibration& calibration() const { return cal_; }

private:
    rec::OperatorSample input_at(std::int64_t t_us) const;
    bool paused(std::int64_t t_us) const;
    void send(proto::Payload payload, std::uint8_t flags = 0);

    void operator_step(const rec::OperatorSample& in);
    void robot_receive(const Packet& p);
    void send_telemetry();
    void operator_receive(const Packet& p);
    void sample(const rec::OperatorSample& in);

    ScenarioScript script_;
    RunOptions opt_;
    std::uint64_t seed_;
    std::int64_t now_us_ = 0;
    std::int64_t end_us_ = 0;
    NetworkModel net_;

    NetLink uplink_;
    NetLink downlink_;

    // operator side
    retarget::Calibration cal_;
    retarget::GripperState gripper_;
    head::FixedRateScheduler arm_sched_{kArmPeriodUs};
    head::FixedRateScheduler head_sched_{kHeadPeriodUs};
    head::FixedRateScheduler heartbeat_sched_{kHeartbeatPeriodUs};
    std::array<std::uint32_t, 8> seq_{};
    std::vector<std::int64_t> toggle_us_, estop_us_, reset_us_;
    std::size_t toggle_next_ = 0, estop_next_ = 0, reset_next_ = 0;
    std::vector<std::int64_t> head_emits_;
    proto::ChannelState operator_channels_;

    // robot side
    proto::ChannelState robot_channels_;
    robot::Robot robot_;
    head::FixedRateScheduler telemetry_sched_{kTelemetryPeriodUs};
    std::uint32_t telemetry_seq_ = 0;

    // metrics
    head::FixedRateScheduler sample_sched_{kSamplePeriodUs};
    std::vector<double> ee_err_;
    std::vector<double> head_err_;
    std::vector<double> latency_ms_;
    std::vector<GoalResult> goal_results_;
    std::size_t goal_next_ = 0;
    std::optional<double> hold_since_;
};

MetricsReport run_scenario(const ScenarioScript& script, std::uint64_t seed, const RunOptions& options = {});

} // namespace viewvr::sim
