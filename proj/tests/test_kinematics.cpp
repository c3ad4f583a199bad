#include <doctest.h>

#include <algorithm>

#include "gen.hpp"
#include "oracles.hpp"
#include "viewvr/kinematics.hpp"

using namespace viewvr;
using namespace viewvr::kin;
using geom::kPi;

namespace {

const DHParams kDh = DHParams::ur3();

oracle::Mat4 oracle_fk(const JointConfig& q) {
    return oracle::dh_fk(std::span<const oracle::DhRow, 6>(oracle::kUr3Dh), std::span<const double, 6>(q.q));
}

oracle::Mat4 to_mat4(const Pose& p) {
    return oracle::mat4_from(geom::to_matrix(p.orientation), {p.position.x, p.position.y, p.position.z});
}

JointConfig random_config(gen::Rng& rng, const JointLimits& lim) {
    JointConfig q;
    for (int i = 0; i < kJoints; ++i) q[i] = rng.uniform(lim.min[i], lim.max[i]);
    return q;
}

double pose_pos_err(const Pose& a, const Pose& b) { return (a.position - b.position).norm(); }

} // namespace

TEST_CASE("DH constants agree with the oracle table") {
    for (int i = 0; i < kJoints; ++i) {
        CHECK(kDh.joints[i].a == oracle::kUr3Dh[i].a);
        CHECK(kDh.joints[i].d == oracle::kUr3Dh[i].d);
        CHECK(kDh.joints[i].alpha == doctest::Approx(oracle::kUr3Dh[i].alpha).epsilon(1e-15));
    }
}

TEST_CASE("fk against the independent matrix chain") {
    // frozen from the oracle chain at q = 0: the arm lies along -x
    const Pose home = fk(JointConfig{}, kDh);
    CHECK(home.position.x == doctest::Approx(-0.4569).epsilon(1e-12));
    CHECK(home.position.y == doctest::Approx(-0.19425).epsilon(1e-12));
    CHECK(home.position.z == doctest::Approx(0.06655).epsilon(1e-12));

    const oracle::Mat4 m0 = oracle_fk(JointConfig{});
    CHECK(std::abs(m0[0][3] - home.position.x) < 1e-15);
    CHECK(std::abs(m0[1][3] - home.position.y) < 1e-15);
    CHECK(std::abs(m0[2][3] - home.position.z) < 1e-15);

    gen::Rng rng(20);
    const JointLimits lim = JointLimits::ur3();
    for (int i = 0; i < 1000; ++i) {
        const JointConfig q = random_config(rng, lim);
        const oracle::Mat4 expect = oracle_fk(q);
        const oracle::Mat4 got = to_mat4(fk(q, kDh));
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) CHECK(std::abs(expect[r][c] - got[r][c]) < 1e-12);

        const auto frames = fk_frames(q, kDh);
        const auto oframes =
            oracle::dh_frames(std::span<const oracle::DhRow, 6>(oracle::kUr3Dh), std::span<const double, 6>(q.q));
        for (int f = 0; f <= kJoints; ++f) {
            CHECK(std::abs(frames[f].origin.x - oframes[f][0][3]) < 1e-12);
            CHECK(std::abs(frames[f].origin.y - oframes[f][1][3]) < 1e-12);
            CHECK(std::abs(frames[f].origin.z - oframes[f][2][3]) < 1e-12);
        }
    }
}

TEST_CASE("fk symmetries") {
    gen::Rng rng(21);
    const JointLimits lim = JointLimits::ur3();
    for (int i = 0; i < 200; ++i) {
        const JointConfig q = random_config(rng, lim);
        const Pose base = fk(q, kDh);

        SUBCASE("q6 spins the flange about its own axis") {
            JointConfig q6 = q;
            const double phi = rng.uniform(-kPi, kPi);
            q6[5] += phi;
            const Pose spun = fk(q6, kDh);
            CHECK(pose_pos_err(base, spun) < 1e-12);
            const geom::Quat about_tool =
                geom::quat_mul(base.orientation, geom::Quat::from_axis_angle({0, 0, 1}, phi));
            CHECK(geom::quat_angle_between(spun.orientation, about_tool) < 1e-12);
        }
        SUBCASE("q1 rotates the flange about the base z axis") {
            JointConfig q1 = q;
            const double phi = rng.uniform(-kPi, kPi);
            q1[0] += phi;
            const Pose turned = fk(q1, kDh);
            const geom::Quat rz = geom::Quat::from_axis_angle({0, 0, 1}, phi);
            CHECK((geom::rotate_point(rz, base.position) - turned.position).norm() < 1e-12);
        }
    }
}

TEST_CASE("ik roundtrip and verification") {
    gen::Rng rng(22);
    const JointLimits lim = JointLimits::ur3();
    for (int i = 0; i < 2000; ++i) {
        const JointConfig q = random_config(rng, lim);
        const Pose target = fk(q, kDh);
        const IkResult res = ik(target, kDh);
        REQUIRE_FALSE(res.solutions.empty());
        double best = 1e9;
        for (const JointConfig& s : res.solutions) {
            best = std::min(best, joint_distance(s, q));
            const Pose check = fk(s, kDh);
            CHECK(pose_pos_err(check, target) < kIkPositionTol);
            CHECK(geom::quat_angle_between(check.orientation, target.orientation) < kIkOrientationTol);
            for (int j = 0; j < kJoints; ++j) {
                CHECK(s[j] > -kPi);
                CHECK(s[j] <= kPi);
            }
        }
        CHECK(best < 1e-8);
        CHECK(res.solutions.size() == res.branches.size());
    }
}

TEST_CASE("ik on generic poses returns eight branches confirmed by damped least squares") {
    gen::Rng rng(23);
    const JointLimits lim = JointLimits::ur3();
    int checked = 0;
    while (checked < 20) {
        const JointConfig q = random_config(rng, lim);
        if (std::abs(std::sin(q[4])) < 0.2 || std::abs(std::sin(q[2])) < 0.2) continue;
        const Pose target = fk(q, kDh);
        const IkResult res = ik(target, kDh);
        if (res.solutions.size() != 8) {
            // only genuinely degenerate poses may lose branches
            CHECK_FALSE(res.dropped.empty());
            continue;
        }
        ++checked;
        const oracle::Mat4 goal = oracle_fk(q);
        for (const JointConfig& s : res.solutions) {
            std::array<double, 6> seed = s.q;
            for (double& v : seed) v += rng.uniform(-1e-3, 1e-3);
            const auto dls = oracle::dls_ik(std::span<const oracle::DhRow, 6>(oracle::kUr3Dh), goal, seed);
            CHECK(dls.converged);
            CHECK(joint_distance(JointConfig{dls.q}, s) < 1e-7);
            // and the numeric fixed point is not some ninth solution
            double nearest = 1e9;
            for (const JointConfig& other : res.solutions) nearest = std::min(nearest, joint_distance(JointConfig{dls.q}, other));
            CHECK(nearest < 1e-7);
        }
    }
}

TEST_CASE("ik edge cases") {
    const Pose far{{1.0, 0.0, 0.2}, geom::Quat::identity()};
    CHECK(ik(far, kDh).solutions.empty());

    const Pose beyond{{0.0, 0.0, kDh.reach() + 0.01}, geom::Quat::identity()};
    CHECK(ik(beyond, kDh).solutions.empty());

    CHECK_THROWS_AS(ik({{0.3, 0, 0.2}, {2, 0, 0, 0}}, kDh), InvalidTarget);
    CHECK_THROWS_AS(ik({{NAN, 0, 0.2}, geom::Quat::identity()}, kDh), InvalidTarget);

    SUBCASE("wrist singular branches are dropped with a diagnostic") {
        JointConfig q{{0.3, -1.2, 1.1, -0.7, 0.0, 0.4}};
        const IkResult res = ik(fk(q, kDh), kDh);
        CHECK_FALSE(res.dropped.empty());
        const bool has_singular = std::any_of(res.dropped.begin(), res.dropped.end(),
                                              [](const IkDiagnostic& d) { return d.reason == "wrist singularity"; });
        CHECK(has_singular);
        for (const JointConfig& s : res.solutions) CHECK(std::abs(std::sin(s[4])) >= kWristSingularity);
    }
}

TEST_CASE("select_solution") {
    const JointConfig a{{0.1, 0, 0, 0, 0, 0}};
    const JointConfig b{{-0.1, 0, 0, 0, 0, 0}};
    const JointConfig c{{1.0, 1.0, 0, 0, 0, 0}};
    CHECK(select_solution(std::vector{c}, a) == c);
    CHECK(select_solution(std::vector{c, a, b}, a) == a);
    CHECK(select_solution(std::vector{a, b}, JointConfig{}) == a);
    CHECK(select_solution(std::vector{b, a}, JointConfig{}) == b);
    CHECK_THROWS_AS(select_solution(std::vector<JointConfig>{}, a), NoSolution);

    // wrapped differences: 3.1 and -3.1 are 0.083 apart, not 6.2
    const JointConfig near_pi{{3.1, 0, 0, 0, 0, 0}};
    const JointConfig other_side{{-3.1, 0, 0, 0, 0, 0}};
    const JointConfig mid{{0.0, 0, 0, 0, 0, 0}};
    CHECK(select_solution(std::vector{mid, other_side}, near_pi) == other_side);

    SUBCASE("argmin invariant under uniform weight scaling") {
        gen::Rng rng(24);
        for (int i = 0; i < 500; ++i) {
            std::vector<JointConfig> sols(8);
            for (auto& s : sols)
                for (int j = 0; j < kJoints; ++j) s[j] = rng.uniform(-kPi, kPi);
            JointConfig cur;
            for (int j = 0; j < kJoints; ++j) cur[j] = rng.uniform(-kPi, kPi);
            JointWeights w;
            for (double& v : w) v = rng.uniform(0.1, 2.0);
            JointWeights scaled = w;
            const double k = rng.uniform(0.01, 100.0);
            for (double& v : scaled) v *= k;
            CHECK(select_solution(sols, cur, w) == select_solution(sols, cur, scaled));
        }
    }
}

TEST_CASE("unwrap_near") {
    const JointConfig ref{{3.0, -3.0, 0, 0, 0, 10.0}};
    const JointConfig q{{-3.1, 3.1, 0.5, 0, 0, 0}};
    const JointConfig u = unwrap_near(q, ref);
    CHECK(u[0] == doctest::Approx(-3.1 + 2 * kPi));
    CHECK(u[1] == doctest::Approx(3.1 - 2 * kPi));
    CHECK(u[2] == doctest::Approx(0.5));
    CHECK(u[5] == doctest::Approx(4 * kPi));
    CHECK(joint_distance(u, q) < 1e-12);
}

TEST_CASE("check_limits") {
    JointLimits lim;
    for (int i = 0; i < kJoints; ++i) {
        lim.min[i] = -1.0;
        lim.max[i] = 1.0;
        lim.max_velocity[i] = 1.0;
    }
    CHECK(check_limits(JointConfig{}, lim).ok());
    JointConfig at_max{};
    at_max[2] = lim.max[2];
    CHECK(check_limits(at_max, lim).ok());

    JointConfig bad{};
    bad[0] = 1.5;
    bad[4] = -2.0;
    const LimitCheck r = check_limits(bad, lim);
    CHECK_FALSE(r.ok());
    CHECK(r.violations == std::vector<int>{1, 5});

    JointConfig nan{};
    nan[3] = NAN;
    CHECK(check_limits(nan, lim).violations == std::vector<int>{4});
}

TEST_CASE("segment_distance against dense sampling") {
    using oracle::V3;
    CHECK(segment_distance({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}) == doctest::Approx(1.0));
    CHECK(segment_distance({0, 0, 0}, {1, 0, 0}, {0.5, -1, 1}, {0.5, 1, 1}) == doctest::Approx(1.0));
    CHECK(segment_distance({0, 0, 0}, {0, 0, 0}, {3, 4, 0}, {3, 4, 0}) == doctest::Approx(5.0));

    gen::Rng rng(25);
    for (int i = 0; i < 300; ++i) {
        Vec3 p0 = rng.vec(1), p1 = rng.vec(1), q0 = rng.vec(1), q1 = rng.vec(1);
        if (i % 10 == 0) q1 = q0 + (p1 - p0) * 0.5;  // parallel segments
        if (i % 17 == 0) p1 = p0;                    // degenerate point
        const double d = segment_distance(p0, p1, q0, q1);
        CHECK(d == doctest::Approx(segment_distance(q0, q1, p0, p1)).epsilon(1e-12));
        const double sampled = oracle::segment_distance_sampled(
            V3{p0.x, p0.y, p0.z}, V3{p1.x, p1.y, p1.z}, V3{q0.x, q0.y, q0.z}, V3{q1.x, q1.y, q1.z});
        CHECK(std::abs(d - sampled) < 1e-6);
        // lower bound: endpoint distance minus segment lengths
        const double bound = (p0 - q0).norm() - (p1 - p0).norm() - (q1 - q0).norm();
        CHECK(d >= bound - 1e-12);
    }
}

TEST_CASE("self_collision with the default capsule model") {
    const CapsuleModel model = CapsuleModel::ur_default();
    REQUIRE(model.capsules.size() == 4);
    CHECK(model.capsules[0].radius == 0.06);
    CHECK(model.capsules[1].radius == 0.05);
    CHECK(model.capsules[2].radius == 0.05);
    CHECK(model.capsules[3].radius == 0.045);

    const JointConfig stretched{};
    const auto rep = collision_report(stretched, model, kDh);
    CHECK_FALSE(rep.colliding);
    CHECK(rep.min_clearance > 0.05);
    CHECK_FALSE(self_collision(stretched, model, kDh));

    JointConfig folded{{0.0, -kPi / 2, 0.97 * kPi, 0.0, kPi / 2, 0.0}};
    const auto frep = collision_report(folded, model, kDh);
    CHECK(frep.colliding);
    CHECK(self_collision(folded, model, kDh));

    SUBCASE("capsule-distance oracle agrees on both configurations") {
        for (const JointConfig& q : {stretched, folded}) {
            const auto frames = fk_frames(q, kDh);
            bool any = false;
            for (int i = 0; i < 4; ++i)
                for (int j = i + 1; j < 4; ++j) {
                    if (model.is_excluded(i, j)) continue;
                    auto pt = [&](const FramePoint& fp) {
                        const Vec3 v = frames[fp.frame].apply(fp.offset);
                        return oracle::V3{v.x, v.y, v.z};
                    };
                    const auto& ci = model.capsules[i];
                    const auto& cj = model.capsules[j];
                    const double d = oracle::segment_distance_sampled(pt(ci.a), pt(ci.b), pt(cj.a), pt(cj.b));
                    any = any || d < ci.radius + cj.radius;
                }
            CHECK(any == self_collision(q, model, kDh));
        }
    }

    SUBCASE("excluded adjacent pair never reports") {
        CapsuleModel overlap;
        overlap.capsules = {{"a", {0, {0, 0, 0}}, {0, {0, 0, 0.2}}, 0.1},
                            {"b", {0, {0, 0, 0.1}}, {0, {0, 0, 0.3}}, 0.1}};
        overlap.excluded = {{0, 1}};
        CHECK_FALSE(self_collision(stretched, overlap, kDh));
        overlap.excluded.clear();
        CHECK(self_collision(stretched, overlap, kDh));
    }
}
