#include <doctest.h>

#include <cmath>

#include "gen.hpp"
#include "head_sim.hpp"
#include "viewvr/headctl.hpp"

using namespace viewvr;
using namespace viewvr::head;

namespace {

HeadState homed_at(double roll, double pitch) {
    HeadState s;
    s.fsm = Phase::Homed;
    s.roll = roll;
    s.pitch = pitch;
    return s;
}

} // namespace

TEST_CASE("Homed is absorbing under homing_step") {
    const HeadState s = homed_at(0.1, -0.2);
    HeadSensors sensors;
    sensors.hall = {true, true};
    const StepResult r = homing_step(s, sensors, MotorLimits{}, 0.001);
    CHECK(r.state.roll == s.roll);
    CHECK(r.state.pitch == s.pitch);
    CHECK(r.state.fsm == Phase::Homed);
    CHECK(r.command.velocity == std::array<double, 2>{0.0, 0.0});
}

TEST_CASE("axis 0.3 rad from its mark homes to within 1e-3") {
    for (double start : {0.3, -0.3}) {
        const auto run = headsim::home({start, start});
        REQUIRE(run.state.fsm == Phase::Homed);
        CHECK(std::abs(run.true_angle[0]) < 1e-3);
        CHECK(std::abs(run.true_angle[1]) < 1e-3);
        CHECK(run.state.roll == 0.0);
        CHECK(run.state.pitch == 0.0);
    }
}

TEST_CASE("homing from random offsets across the range finishes within 10 s") {
    gen::Rng rng(7);
    const MotorLimits lim;
    for (int i = 0; i < 200; ++i) {
        const std::array<double, 2> init{rng.uniform(lim.range[0].min, lim.range[0].max),
                                         rng.uniform(lim.range[1].min, lim.range[1].max)};
        const auto run = headsim::home(init);
        INFO("start " << init[0] << ", " << init[1]);
        REQUIRE(run.state.fsm == Phase::Homed);
        CHECK(run.seconds <= 10.0);
        CHECK(std::abs(run.true_angle[0]) < 1e-3);
        CHECK(std::abs(run.true_angle[1]) < 1e-3);
    }
}

TEST_CASE("homing visits the phases in order") {
    const MotorLimits lim;
    HeadPlant plant(lim, {}, {0.4, -0.2});
    HeadState s;
    std::vector<Phase> seen{s.axis[0].phase};
    for (int k = 0; k < 20000 && s.fsm != Phase::Homed; ++k) {
        const auto r = homing_step(s, plant.sensors(), lim, 0.001);
        s = r.state;
        plant.step(r.command, 0.001);
        if (s.axis[0].phase != seen.back()) seen.push_back(s.axis[0].phase);
    }
    const std::vector<Phase> expect{Phase::Unhomed, Phase::SeekHall,   Phase::Backoff, Phase::SlowApproach,
                                    Phase::ZeroSet, Phase::MoveNeutral, Phase::Homed};
    CHECK(seen == expect);
}

TEST_CASE("stuck Hall sensor faults after a bounded sweep") {
    for (int axis = 0; axis < 2; ++axis) {
        PlantConfig pc;
        pc.hall_stuck[axis] = true;
        for (double start : {-0.9, 0.0, 0.7}) {
            const auto run = headsim::home({start, start * 0.5}, pc);
            CHECK(run.state.fsm == Phase::Faulted);
            CHECK(run.seconds < 10.0);

            // Faulted is absorbing until reset.
            HeadSensors sensors;
            sensors.hall = {true, true};
            const auto r = homing_step(run.state, sensors, MotorLimits{}, 0.001);
            CHECK(r.state.fsm == Phase::Faulted);
            CHECK(r.command.velocity == std::array<double, 2>{0.0, 0.0});
            CHECK(reset(run.state).fsm == Phase::Unhomed);
        }
    }
}

TEST_CASE("track_step refuses to run before homing") {
    CHECK_THROWS_AS(track_step(HeadState{}, {0.1, 0.1}, MotorLimits{}, 0.01), NotHomed);
    HeadState faulted;
    faulted.fsm = Phase::Faulted;
    CHECK_THROWS_AS(track_step(faulted, {0.1, 0.1}, MotorLimits{}, 0.01), NotHomed);
}

TEST_CASE("at target with zero velocity nothing changes") {
    const HeadState s = homed_at(0.25, -0.1);
    const auto r = track_step(s, {0.25, -0.1}, MotorLimits{}, 0.01);
    CHECK(r.state.roll == 0.25);
    CHECK(r.state.pitch == -0.1);
    CHECK(r.state.roll_vel == 0.0);
    CHECK(r.command.velocity == std::array<double, 2>{0.0, 0.0});
}

TEST_CASE("0.5 rad step settles at the closed-form trapezoid time") {
    const MotorLimits lim;  // 2 rad/s, 10 rad/s^2
    const double expected = 0.5 / 2.0 + 2.0 / 10.0;
    CHECK(trapezoid_time(0.5, lim.omega_max, lim.alpha_max) == doctest::Approx(expected));
    CHECK(expected == doctest::Approx(0.45));

    const double dt = 0.01;
    HeadState s = homed_at(0.0, 0.0);
    int steps = 0;
    while (!(s.roll == 0.5 && s.roll_vel == 0.0) && steps < 1000) {
        s = track_step(s, {0.5, 0.0}, lim, dt).state;
        ++steps;
    }
    CHECK(std::abs(steps * dt - expected) <= dt + 1e-12);
}

TEST_CASE("short moves follow the triangular profile time") {
    const MotorLimits lim;
    const double dt = 0.001;
    for (double d : {0.01, 0.1, 0.3}) {
        AxisMotion m{0.0, 0.0};
        int steps = 0;
        while (!(m.pos == d && m.vel == 0.0)) {
            m = trapezoid_step(m, d, lim.omega_max, lim.alpha_max, dt);
            ++steps;
        }
        CHECK(std::abs(steps * dt - 2.0 * std::sqrt(d / lim.alpha_max)) <= 2 * dt);
    }
}

TEST_CASE("velocity and acceleration bounds hold over random target sequences") {
    gen::Rng rng(99);
    const MotorLimits lim;
    const double dt = 0.01;
    for (int trial = 0; trial < 200; ++trial) {
        HeadState s = homed_at(0.0, 0.0);
        for (int seg = 0; seg < 8; ++seg) {
            // Targets may lie outside the range; the controller clamps them.
            const RollPitch target{rng.uniform(-1.5, 1.5), rng.uniform(-1.2, 1.5)};
            const int hold = rng.integer(1, 80);
            for (int k = 0; k < hold; ++k) {
                const auto r = track_step(s, target, lim, dt);
                for (int ax = 0; ax < 2; ++ax) {
                    REQUIRE(std::abs(r.state.vel(ax)) <= lim.omega_max);
                    REQUIRE(std::abs(r.state.vel(ax) - s.vel(ax)) <= lim.alpha_max * dt * (1 + 1e-12));
                }
                s = r.state;
            }
        }
    }
}

TEST_CASE("error decreases monotonically once braking starts and reaches the clamped target") {
    gen::Rng rng(5);
    const MotorLimits lim;
    const double dt = 0.01;
    for (int trial = 0; trial < 300; ++trial) {
        HeadState s = homed_at(rng.uniform(-1.0, 1.0), rng.uniform(-0.7, 1.0));
        const RollPitch raw{rng.uniform(-1.3, 1.3), rng.uniform(-1.0, 1.3)};
        const RollPitch goal = lim.clamp(raw);
        double prev_speed = 0.0;
        double prev_err = std::abs(goal.roll - s.roll);
        bool braking = false;
        for (int k = 0; k < 500; ++k) {
            s = track_step(s, raw, lim, dt).state;
            const double err = std::abs(goal.roll - s.roll);
            if (std::abs(s.roll_vel) < prev_speed) braking = true;
            if (braking) REQUIRE(err <= prev_err);
            prev_err = err;
            prev_speed = std::abs(s.roll_vel);
        }
        CHECK(std::abs(goal.roll - s.roll) < 1e-6);
        CHECK(std::abs(goal.pitch - s.pitch) < 1e-6);
        CHECK(s.roll >= lim.range[0].min);
        CHECK(s.roll <= lim.range[0].max);
    }
}

TEST_CASE("Homed stays Homed under tracking") {
    HeadState s = homed_at(0.0, 0.0);
    for (int k = 0; k < 100; ++k) s = track_step(s, {0.3, -0.3}, MotorLimits{}, 0.01).state;
    CHECK(s.fsm == Phase::Homed);
}

TEST_CASE("scheduler emits every period and catches up after a jump") {
    FixedRateScheduler sched(10'000);
    CHECK(sched.tick(0) == std::vector<std::int64_t>{0});
    CHECK(sched.tick(10'000) == std::vector<std::int64_t>{10'000});
    CHECK(sched.tick(20'000) == std::vector<std::int64_t>{20'000});
    CHECK(sched.tick(25'000).empty());
    CHECK(sched.tick(55'000) == std::vector<std::int64_t>{30'000, 40'000, 50'000});

    FixedRateScheduler jump(10'000);
    jump.tick(0);
    CHECK(jump.tick(35'000).size() == 3);
}

TEST_CASE("scheduler ledger does not depend on how the clock is sampled") {
    gen::Rng rng(3);
    FixedRateScheduler coarse(10'000), fine(10'000);
    std::vector<std::int64_t> a, b;
    std::int64_t t = 0;
    while (t < 2'000'000) {
        t += rng.integer(1, 40'000);  // an irregular caller, e.g. one stalled on arm work
        for (auto e : coarse.tick(t)) a.push_back(e);
    }
    for (std::int64_t u = 0; u <= t; u += 1000)
        for (auto e : fine.tick(u)) b.push_back(e);
    CHECK(a == b);
    for (std::size_t i = 1; i < a.size(); ++i) REQUIRE(a[i] - a[i - 1] == 10'000);
}

TEST_CASE("plant sensors: Hall window and encoder quantisation") {
    const MotorLimits lim;
    PlantConfig pc;
    HeadPlant p(lim, pc, {0.004, 0.2});
    auto s = p.sensors();
    CHECK(s.hall[0]);
    CHECK_FALSE(s.hall[1]);
    CHECK(s.encoder == std::array<double, 2>{0.0, 0.0});

    p.step({{1.0, -1.0}}, 0.01);  // +0.01, -0.01
    s = p.sensors();
    CHECK(s.encoder[0] == doctest::Approx(0.01));
    CHECK(s.encoder[1] == doctest::Approx(-0.01));
    CHECK_FALSE(s.hall[0]);  // 0.014 rad > 0.5 deg

    // Hard stop holds the axis.
    HeadPlant q(lim, pc, {lim.range[0].max, 0.0});
    q.step({{1.0, 0.0}}, 0.01);
    CHECK(q.angles()[0] == lim.range[0].max);
    CHECK(q.velocities()[0] == 0.0);
}
