#pragma once

// Two-axis robotic head: homing against Hall marks with incremental encoders,
// trapezoidal position tracking under motor limits, the fixed-rate command
// scheduler, and the simulated plant the controller runs against.
//
// Axis 0 is roll, axis 1 is pitch. All angles in radians, times in seconds
// unless suffixed _us.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "viewvr/geom.hpp"

namespace viewvr::head {

using geom::RollPitch;

inline constexpr int kAxes = 2;

class NotHomed : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct AxisRange {
    double min = 0.0;
    double max = 0.0;

    double clamp(double v) const { return v < min ? min : (v > max ? max : v); }
    double span() const { return max - min; }
};

struct MotorLimits {
    double omega_max = 2.0;   // rad/s
    double alpha_max = 10.0;  // rad/s^2
    std::array<AxisRange, kAxes> range{{{geom::deg_to_rad(-60.0), geom::deg_to_rad(60.0)},
                                        {geom::deg_to_rad(-45.0), geom::deg_to_rad(60.0)}}};

    RollPitch clamp(const RollPitch& t) const { return {range[0].clamp(t.roll), range[1].clamp(t.pitch)}; }
};

enum class Phase : std::uint8_t {
    Unhomed,
    SeekHall,
    Backoff,
    SlowApproach,
    ZeroSet,
    MoveNeutral,
    Homed,
    Faulted,
};

std::string_view to_string(Phase p);

struct HomingConfig {
    double seek_speed = 0.5;
    double backoff = geom::deg_to_rad(5.0);
    double approach_speed = 0.05;
    /// Half-width of the Hall trigger window around each home mark.
    double hall_window = geom::deg_to_rad(0.5);
    /// Home mark positions in the calibrated frame.
    std::array<double, kAxes> home_mark{0.0, 0.0};
    /// Encoder frozen this long while driving counts as a stall at a hard stop.
    double stall_time = 0.05;
    /// Total travel (in units of the axis span) after which the sweep is abandoned.
    double max_travel_spans = 2.2;
};

struct AxisHoming {
    Phase phase = Phase::Unhomed;
    int direction = -1;
    bool reversed = false;
    double travel = 0.0;
    double stall_for = 0.0;
    double last_encoder = 0.0;
    double leg_start = 0.0;   // encoder reading where the current leg began
    bool zeroed = false;
};

struct HeadState {
    double roll = 0.0;
    double pitch = 0.0;
    double roll_vel = 0.0;
    double pitch_vel = 0.0;
    Phase fsm = Phase::Unhomed;
    std::array<double, kAxes> encoder_offset{0.0, 0.0};
    std::array<AxisHoming, kAxes> axis{};

    double& pos(int a) { return a == 0 ? roll : pitch; }
    double pos(int a) const { return a == 0 ? roll : pitch; }
    double& vel(int a) { return a == 0 ? roll_vel : pitch_vel; }
    double vel(int a) const { return a == 0 ? roll_vel : pitch_vel; }
    RollPitch angles() const { return {roll, pitch}; }
};

struct HeadSensors {
    std::array<bool, kAxes> hall{false, false};
    /// Raw incremental encoder angle since power-on.
    std::array<double, kAxes> encoder{0.0, 0.0};
};

/// Velocity command per axis.
struct MotorCommand {
    std::array<double, kAxes> velocity{0.0, 0.0};
};

struct StepResult {
    HeadState state;
    MotorCommand command;
};

/// One control period of the homing procedure. Both axes home concurrently;
/// MoveNeutral starts once both have set their zero. Homed and Faulted are
/// absorbing here.
StepResult homing_step(const HeadState& state, const HeadSensors& sensors, const MotorLimits& lim, double dt,
                       const HomingConfig& cfg = {});

/// Clears a fault (or a completed homing) back to Unhomed.
HeadState reset(const HeadState& state);

struct AxisMotion {
    double pos = 0.0;
    double vel = 0.0;
};

/// One discrete trapezoid step toward `target`: |v| <= omega_max, |dv| <= alpha_max*dt,
/// and the braking curve lands on the target exactly.
AxisMotion trapezoid_step(const AxisMotion& m, double target, double omega_max, double alpha_max, double dt);

/// Trapezoidal tracking of a (clamped) target. Throws NotHomed unless Homed.
StepResult track_step(const HeadState& state, const RollPitch& target, const MotorLimits& lim, double dt);

/// Closed-form rest-to-rest trapezoid time for a step of `distance`.
double trapezoid_time(double distance, double omega_max, double alpha_max);

/// Fixed-period emission clock with catch-up: every missed period is emitted.
class FixedRateScheduler {
public:
    explicit FixedRateScheduler(std::int64_t period_us = 10'000, std::int64_t start_us = 0)
        : period_us_(period_us), next_us_(start_us) {}

    /// Scheduled emission times in (previous tick, now_us], oldest first.
    std::vector<std::int64_t> tick(std::int64_t now_us);

    std::int64_t period_us() const { return period_us_; }
    std::int64_t next_us() const { return next_us_; }

private:
    std::int64_t period_us_;
    std::int64_t next_us_;
};

struct PlantConfig {
    double encoder_tick = 0.0005;
    double hall_window = geom::deg_to_rad(0.5);
    std::array<double, kAxes> home_mark{0.0, 0.0};
    /// Fault injection: sensor never reports.
    std::array<bool, kAxes> hall_stuck{false, false};
};

/// Simulated head mechanics. Velocity follows the command; hard stops at the
/// range ends hold the axis still.
class HeadPlant {
public:
    HeadPlant(const MotorLimits& lim, const PlantConfig& cfg, std::array<double, kAxes> initial);

    void step(const MotorCommand& cmd, double dt);
    HeadSensors sensors() const;

    std::array<double, kAxes> angles() const { return angle_; }
    std::array<double, kAxes> velocities() const { return velocity_; }

private:
    MotorLimits lim_;
    PlantConfig cfg_;
    std::array<double, kAxes> angle_{};
    std::array<double, kAxes> velocity_{};
    std::array<double, kAxes> power_on_{};
};

} // namespace viewvr::head
