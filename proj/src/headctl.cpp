#include "viewvr/headctl.hpp"

#include <algorithm>
#include <cmath>

namespace viewvr::head {

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::Unhomed: return "Unhomed";
        case Phase::SeekHall: return "SeekHall";
        case Phase::Backoff: return "Backoff";
        case Phase::SlowApproach: return "SlowApproach";
        case Phase::ZeroSet: return "ZeroSet";
        case Phase::MoveNeutral: return "MoveNeutral";
        case Phase::Homed: return "Homed";
        case Phase::Faulted: return "Faulted";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Trapezoid

AxisMotion trapezoid_step(const AxisMotion& m, double target, double omega_max, double alpha_max, double dt) {
    const double e = target - m.pos;
    if (e == 0.0 && m.vel == 0.0) {
        return m;
    }
    const double a = alpha_max * dt;  // velocity change allowed per step
    const double s = e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);

    // Largest speed v for which moving at v now and then braking by at most `a`
    // per step can still cover |e| exactly. In units of a*dt the stopping distance
    // from v = a*(n + f) is (n + 1)*f + n*(n + 1)/2.
    const double dist = std::abs(e) / (a * dt);
    double n = std::floor((std::sqrt(1.0 + 8.0 * dist) - 1.0) / 2.0);
    while ((n + 1.0) * (n + 2.0) / 2.0 <= dist) n += 1.0;
    while (n > 0.0 && n * (n + 1.0) / 2.0 > dist) n -= 1.0;
    const double f = (dist - n * (n + 1.0) / 2.0) / (n + 1.0);
    const double v_brake = a * (n + f);

    const double wanted = s * std::min(omega_max, v_brake);
    double v = std::clamp(wanted, m.vel - a, m.vel + a);
    v = std::clamp(v, -omega_max, omega_max);

    AxisMotion out{m.pos + v * dt, v};
    if (std::abs(target - out.pos) <= 1e-12 * (1.0 + std::abs(target))) {
        out.pos = target;
    }
    return out;
}

double trapezoid_time(double distance, double omega_max, double alpha_max) {
    const double d = std::abs(distance);
    if (d >= omega_max * omega_max / alpha_max) {
        return d / omega_max + omega_max / alpha_max;
    }
    return 2.0 * std::sqrt(d / alpha_max);
}

StepResult track_step(const HeadState& state, const RollPitch& target, const MotorLimits& lim, double dt) {
    if (state.fsm != Phase::Homed) {
        throw NotHomed("head must be homed before tracking");
    }
    const RollPitch goal = lim.clamp(target);
    StepResult r{state, {}};
    for (int ax = 0; ax < kAxes; ++ax) {
        const AxisMotion m = trapezoid_step({state.pos(ax), state.vel(ax)}, ax == 0 ? goal.roll : goal.pitch,
                                            lim.omega_max, lim.alpha_max, dt);
        r.state.pos(ax) = m.pos;
        r.state.vel(ax) = m.vel;
        r.command.velocity[ax] = m.vel;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Homing

namespace {

void fault(HeadState& st, int ax) {
    st.axis[ax].phase = Phase::Faulted;
    st.fsm = Phase::Faulted;
}

void step_axis(HeadState& st, int ax, const HeadSensors& sensors, const MotorLimits& lim, double dt,
               const HomingConfig& cfg) {
    AxisHoming& h = st.axis[ax];
    double& v = st.vel(ax);
    const double enc = sensors.encoder[ax];
    const bool hall = sensors.hall[ax];
    const double dv = lim.alpha_max * dt;
    auto ramp = [&](double want) { v = std::clamp(want, v - dv, v + dv); };

    const double moved = std::abs(enc - h.last_encoder);
    h.travel += moved;
    h.last_encoder = enc;
    // Only pushing in the leg's own direction counts toward a stall, so the
    // ramp through zero after a reversal does not.
    const int leg_dir = h.phase == Phase::Backoff ? -h.direction : h.direction;
    const bool driving = v * leg_dir >= 0.5 * cfg.approach_speed;
    h.stall_for = (driving && moved == 0.0) ? h.stall_for + dt : 0.0;
    const bool stalled = h.stall_for >= cfg.stall_time;

    switch (h.phase) {
        case Phase::SeekHall:
            if (hall) {
                h.phase = Phase::Backoff;
                h.leg_start = enc;
                h.stall_for = 0.0;
                ramp(-h.direction * cfg.seek_speed);
                break;
            }
            if (h.travel > cfg.max_travel_spans * lim.range[ax].span()) {
                fault(st, ax);
                return;
            }
            if (stalled) {
                if (h.reversed) {
                    fault(st, ax);
                    return;
                }
                h.reversed = true;
                h.direction = -h.direction;
                h.stall_for = 0.0;
            }
            ramp(h.direction * cfg.seek_speed);
            break;

        case Phase::Backoff:
            if (stalled) {
                fault(st, ax);
                return;
            }
            if (!hall && std::abs(enc - h.leg_start) >= cfg.backoff) {
                h.phase = Phase::SlowApproach;
                h.leg_start = enc;
                ramp(h.direction * cfg.approach_speed);
                break;
            }
            ramp(-h.direction * cfg.seek_speed);
            break;

        case Phase::SlowApproach:
            if (hall) {
                // Rising edge on the near side of the mark, seen from the approach direction.
                const double edge = cfg.home_mark[ax] - h.direction * cfg.hall_window;
                st.encoder_offset[ax] = enc - edge;
                st.pos(ax) = edge;
                h.zeroed = true;
                h.phase = Phase::ZeroSet;
                ramp(0.0);
                st.pos(ax) += v * dt;
                return;
            }
            if (stalled || std::abs(enc - h.leg_start) > 4.0 * cfg.backoff) {
                fault(st, ax);
                return;
            }
            ramp(h.direction * cfg.approach_speed);
            break;

        case Phase::ZeroSet:
            ramp(0.0);
            st.pos(ax) += v * dt;
            return;

        default:
            return;
    }
    st.pos(ax) = enc;
}

} // namespace

StepResult homing_step(const HeadState& state, const HeadSensors& sensors, const MotorLimits& lim, double dt,
                       const HomingConfig& cfg) {
    StepResult r{state, {}};
    HeadState& st = r.state;
    if (st.fsm == Phase::Homed || st.fsm == Phase::Faulted) {
        return r;
    }

    if (st.fsm == Phase::Unhomed) {
        for (int ax = 0; ax < kAxes; ++ax) {
            st.axis[ax] = AxisHoming{};
            st.axis[ax].phase = Phase::SeekHall;
            st.axis[ax].last_encoder = sensors.encoder[ax];
            st.pos(ax) = sensors.encoder[ax];
            st.vel(ax) = 0.0;
        }
        st.fsm = Phase::SeekHall;
    }

    if (st.fsm == Phase::MoveNeutral) {
        bool done = true;
        for (int ax = 0; ax < kAxes; ++ax) {
            const AxisMotion m =
                trapezoid_step({st.pos(ax), st.vel(ax)}, cfg.home_mark[ax], lim.omega_max, lim.alpha_max, dt);
            st.pos(ax) = m.pos;
            st.vel(ax) = m.vel;
            done = done && m.pos == cfg.home_mark[ax] && m.vel == 0.0;
        }
        if (done) {
            st.fsm = Phase::Homed;
            for (auto& h : st.axis) h.phase = Phase::Homed;
        }
    } else {
        for (int ax = 0; ax < kAxes; ++ax) {
            step_axis(st, ax, sensors, lim, dt, cfg);
            if (st.fsm == Phase::Faulted) {
                st.roll_vel = st.pitch_vel = 0.0;
                return r;
            }
        }
        const Phase lagging = std::min(st.axis[0].phase, st.axis[1].phase);
        if (lagging == Phase::ZeroSet) {
            st.fsm = Phase::MoveNeutral;
            for (auto& h : st.axis) h.phase = Phase::MoveNeutral;
        } else {
            st.fsm = lagging;
        }
    }
    r.command.velocity = {st.roll_vel, st.pitch_vel};
    return r;
}

HeadState reset(const HeadState& state) {
    HeadState out;
    out.roll = state.roll;
    out.pitch = state.pitch;
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::int64_t> FixedRateScheduler::tick(std::int64_t now_us) {
    std::vector<std::int64_t> due;
    while (next_us_ <= now_us) {
        due.push_back(next_us_);
        next_us_ += period_us_;
    }
    return due;
}

HeadPlant::HeadPlant(const MotorLimits& lim, const PlantConfig& cfg, std::array<double, kAxes> initial)
    : lim_(lim), cfg_(cfg), power_on_(initial) {
    for (int ax = 0; ax < kAxes; ++ax) angle_[ax] = lim_.range[ax].clamp(initial[ax]);
}

void HeadPlant::step(const MotorCommand& cmd, double dt) {
    for (int ax = 0; ax < kAxes; ++ax) {
        const double next = lim_.range[ax].clamp(angle_[ax] + cmd.velocity[ax] * dt);
        velocity_[ax] = (next - angle_[ax]) / dt;
        angle_[ax] = next;
    }
}

HeadSensors HeadPlant::sensors() const {
    HeadSensors s;
    for (int ax = 0; ax < kAxes; ++ax) {
        s.encoder[ax] = std::round((angle_[ax] - power_on_[ax]) / cfg_.encoder_tick) * cfg_.encoder_tick;
        s.hall[ax] = !cfg_.hall_stuck[ax] && std::abs(angle_[ax] - cfg_.home_mark[ax]) <= cfg_.hall_window;
    }
    return s;
}

} // namespace viewvr::head
