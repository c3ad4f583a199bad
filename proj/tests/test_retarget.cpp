#include <doctest.h>

#include "gen.hpp"
#include "viewvr/retarget.hpp"

using namespace viewvr;
using namespace viewvr::retarget;
using geom::kPi;

TEST_CASE("calibrate") {
    const Calibration id = calibrate(Pose::identity(), Pose::identity(), Quat::identity());
    CHECK(map_hand(id, Pose::identity()) == Pose::identity());

    gen::Rng rng(10);
    const Pose hand = rng.pose(), ee = rng.pose();
    const Quat head = rng.quat(), align = rng.quat();
    const Calibration cal = calibrate(hand, ee, head, align, 0.7);
    CHECK(cal.hand_origin == hand);
    CHECK(cal.ee_origin == ee);
    CHECK(cal.head_origin == head);
    CHECK(cal.scale == 0.7);

    CHECK_THROWS_AS(calibrate(hand, ee, head, align, 0.0), InvalidCalibration);
    CHECK_THROWS_AS(calibrate(hand, ee, head, align, -1.0), InvalidCalibration);
    CHECK_THROWS_AS(calibrate(hand, ee, head, align, NAN), InvalidCalibration);
}

TEST_CASE("map_hand fixed point and equivariance") {
    gen::Rng rng(11);
    for (int i = 0; i < 500; ++i) {
        const Calibration cal =
            calibrate(rng.pose(), rng.pose(), rng.quat(), rng.quat(), rng.uniform(0.1, 3.0));
        const Pose at_origin = map_hand(cal, cal.hand_origin);
        CHECK(at_origin.position == cal.ee_origin.position);
        CHECK(geom::quat_angle_between(at_origin.orientation, cal.ee_origin.orientation) < 1e-12);

        const Pose hand = rng.pose();
        const Vec3 delta = rng.vec(0.5);
        const Pose a = map_hand(cal, hand);
        const Pose b = map_hand(cal, {hand.position + delta, hand.orientation});
        const Vec3 expect = geom::rotate_point(cal.frame_align, delta) * cal.scale;
        CHECK((b.position - a.position - expect).norm() < 1e-12);
        CHECK(geom::quat_angle_between(a.orientation, b.orientation) < 1e-12);
        CHECK(std::abs(a.orientation.norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("map_hand with identity alignment") {
    gen::Rng rng(12);
    const Pose hand0 = rng.pose(), ee0 = rng.pose();
    const Calibration cal = calibrate(hand0, ee0, Quat::identity());
    Pose moved = hand0;
    moved.position.x += 0.10;
    const Pose out = map_hand(cal, moved);
    CHECK((out.position - ee0.position - Vec3{0.10, 0, 0}).norm() < 1e-12);

    const Calibration half = calibrate(hand0, ee0, Quat::identity(), Quat::identity(), 0.5);
    const Pose h = map_hand(half, moved);
    CHECK((h.position - ee0.position - Vec3{0.05, 0, 0}).norm() < 1e-12);
    CHECK(geom::quat_angle_between(h.orientation, ee0.orientation) < 1e-12);
}

TEST_CASE("map_hand rotates relative to calibration") {
    const Pose hand0{{0.2, 0.1, 1.0}, Quat::identity()};
    const Pose ee0{{0.3, 0.0, 0.2}, Quat::from_axis_angle({1, 0, 0}, kPi)};
    const Calibration cal = calibrate(hand0, ee0, Quat::identity());
    const Quat yaw = Quat::from_axis_angle({0, 0, 1}, 0.4);
    const Pose out = map_hand(cal, {hand0.position, yaw});
    // a world-frame yaw of the hand yaws the tool about the world z axis
    CHECK(geom::quat_angle_between(out.orientation, geom::quat_mul(yaw, ee0.orientation)) < 1e-12);

    // frame_align maps operator axes to robot axes: 90 deg about z swaps x -> y
    const Quat align = Quat::from_axis_angle({0, 0, 1}, kPi / 2);
    const Calibration c2 = calibrate(hand0, ee0, Quat::identity(), align);
    const Pose o2 = map_hand(c2, {hand0.position + Vec3{0.1, 0, 0}, hand0.orientation});
    CHECK((o2.position - ee0.position - Vec3{0, 0.1, 0}).norm() < 1e-12);
}

TEST_CASE("map_head") {
    gen::Rng rng(13);
    const HeadLimits lim;
    const Quat head0 = rng.quat();
    const Calibration cal = calibrate(Pose::identity(), Pose::identity(), head0);

    const auto zero = map_head(cal, head0, lim);
    CHECK(std::abs(zero.angles.roll) < 1e-12);
    CHECK(std::abs(zero.angles.pitch) < 1e-12);

    HeadLimits tight;
    tight.pitch_min = -1.0;
    tight.pitch_max = 1.0;
    const Calibration level = calibrate(Pose::identity(), Pose::identity(), Quat::identity());
    const auto clamped = map_head(level, geom::from_roll_pitch(0.0, 2.0), tight);
    // pitch of 2.0 rad decomposes as pitch pi-2 with roll pi; either way the clamp holds
    CHECK(clamped.angles.pitch <= 1.0);
    const auto clamped2 = map_head(level, geom::from_roll_pitch(0.0, 1.4), tight);
    CHECK(clamped2.angles.pitch == 1.0);

    SUBCASE("yaw discarded, matches the Euler decomposition") {
        const Quat q = geom::from_roll_pitch(geom::deg_to_rad(20), geom::deg_to_rad(10), geom::deg_to_rad(45));
        const auto m = map_head(level, q, lim);
        CHECK(m.angles.roll == doctest::Approx(geom::deg_to_rad(20)).epsilon(1e-12));
        CHECK(m.angles.pitch == doctest::Approx(geom::deg_to_rad(10)).epsilon(1e-12));
    }

    SUBCASE("output always within limits") {
        for (int i = 0; i < 2000; ++i) {
            const auto m = map_head(cal, rng.quat(), lim);
            CHECK(m.angles.roll >= lim.roll_min);
            CHECK(m.angles.roll <= lim.roll_max);
            CHECK(m.angles.pitch >= lim.pitch_min);
            CHECK(m.angles.pitch <= lim.pitch_max);
        }
    }

    SUBCASE("gimbal degenerate input is flagged and clamped") {
        const auto m = map_head(level, geom::from_roll_pitch(0.2, kPi / 2), lim);
        CHECK(m.degenerate);
        CHECK(m.angles.pitch == lim.pitch_max);
    }
}

TEST_CASE("map_pinch") {
    const PinchConfig cfg;
    CHECK(map_pinch(60.0, cfg) == 1.0);
    CHECK(map_pinch(10.0, cfg) == 0.0);
    CHECK(map_pinch(35.0, cfg) == 0.5);
    CHECK(map_pinch(-20.0, cfg) == 0.0);
    CHECK(map_pinch(120.0, cfg) == 1.0);

    gen::Rng rng(14);
    double prev_angle = -50, prev = map_pinch(prev_angle, cfg);
    for (int i = 0; i < 2000; ++i) {
        const double a = prev_angle + rng.uniform(0.0, 0.1);
        const double v = map_pinch(a, cfg);
        CHECK(v >= prev);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        prev = v;
        prev_angle = a;
    }
}

TEST_CASE("toggle_camera") {
    GripperState s;
    CHECK(s.active_camera == Camera::Wrist);
    const GripperState a = toggle_camera(s, 1.0);
    CHECK(a.active_camera == Camera::Head);
    const GripperState b = toggle_camera(a, 2.0);
    CHECK(b.active_camera == Camera::Wrist);

    const GripperState bounce = toggle_camera(a, 1.05);
    CHECK(bounce == a);
    // the window is 200 ms wide; a press exactly at its edge counts
    CHECK(toggle_camera(a, 1.2).active_camera == Camera::Wrist);

    CHECK(camera_from_string("head") == Camera::Head);
    CHECK(camera_from_string("wrist") == Camera::Wrist);
    CHECK_FALSE(camera_from_string("side").has_value());
}

TEST_CASE("clutch holds output and re-anchors on release") {
    const Pose hand0{{0, 0, 1}, Quat::identity()};
    const Pose ee0{{0.3, 0, 0.2}, Quat::identity()};
    ClutchedRetarget r(calibrate(hand0, ee0, Quat::identity()));

    const Pose p1 = r.update({{0.1, 0, 1}, Quat::identity()}, false);
    CHECK((p1.position - Vec3{0.4, 0, 0.2}).norm() < 1e-12);

    const Pose held = r.update({{-0.3, 0, 1}, Quat::identity()}, true);
    CHECK(held == p1);

    // release at a new hand location: no jump
    const Pose p2 = r.update({{-0.3, 0, 1}, Quat::identity()}, false);
    CHECK((p2.position - p1.position).norm() < 1e-12);
    const Pose p3 = r.update({{-0.2, 0, 1}, Quat::identity()}, false);
    CHECK((p3.position - Vec3{0.5, 0, 0.2}).norm() < 1e-12);
}
