#include "viewvr/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace viewvr::kin {

using geom::kPi;
using geom::wrap_angle;

bool JointConfig::finite() const {
    return std::all_of(q.begin(), q.end(), [](double v) { return std::isfinite(v); });
}

JointConfig JointConfig::normalized() const {
    JointConfig out;
    for (int i = 0; i < kJoints; ++i) out[i] = wrap_angle(q[i]);
    return out;
}

double joint_distance(const JointConfig& a, const JointConfig& b) {
    double s = 0.0;
    for (int i = 0; i < kJoints; ++i) {
        const double d = wrap_angle(a[i] - b[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

JointConfig unwrap_near(const JointConfig& q, const JointConfig& reference) {
    JointConfig out;
    for (int i = 0; i < kJoints; ++i) out[i] = reference[i] + wrap_angle(q[i] - reference[i]);
    return out;
}

DHParams DHParams::ur3() {
    DHParams p;
    p.joints = {{
        {0.0, 0.1519, kPi / 2},
        {-0.24365, 0.0, 0.0},
        {-0.21325, 0.0, 0.0},
        {0.0, 0.11235, kPi / 2},
        {0.0, 0.08535, -kPi / 2},
        {0.0, 0.0819, 0.0},
    }};
    return p;
}

double DHParams::reach() const {
    double r = 0.0;
    for (const auto& j : joints) r += std::abs(j.a) + std::abs(j.d);
    return r;
}

// ---------------------------------------------------------------------------

Vec3 Frame::apply(const Vec3& p) const {
    const auto& r = rotation;
    return {r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z + origin.x,
            r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z + origin.y,
            r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z + origin.z};
}

Frame Frame::operator*(const Frame& o) const {
    Frame out;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            out.rotation[i][j] = rotation[i][0] * o.rotation[0][j] + rotation[i][1] * o.rotation[1][j] +
                                 rotation[i][2] * o.rotation[2][j];
    out.origin = apply(o.origin);
    return out;
}

Frame Frame::inverse() const {
    Frame out;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out.rotation[i][j] = rotation[j][i];
    const Vec3 t = out.apply(origin);  // origin is zero here, so this is R^T * origin
    out.origin = -t;
    return out;
}

Frame Frame::from_pose(const Pose& p) { return {geom::to_matrix(p.orientation), p.position}; }

Pose Frame::to_pose() const { return {origin, geom::from_matrix(rotation)}; }

Frame dh_transform(const DhJoint& j, double theta) {
    const double ct = std::cos(theta), st = std::sin(theta);
    const double ca = std::cos(j.alpha), sa = std::sin(j.alpha);
    Frame f;
    f.rotation = {{{ct, -st * ca, st * sa}, {st, ct * ca, -ct * sa}, {0.0, sa, ca}}};
    f.origin = {j.a * ct, j.a * st, j.d};
    return f;
}

std::array<Frame, kJoints + 1> fk_frames(const JointConfig& q, const DHParams& dh) {
    std::array<Frame, kJoints + 1> frames;
    for (int i = 0; i < kJoints; ++i) frames[i + 1] = frames[i] * dh_transform(dh.joints[i], q[i]);
    return frames;
}

Pose fk(const JointConfig& q, const DHParams& dh) { return fk_frames(q, dh)[kJoints].to_pose(); }

// ---------------------------------------------------------------------------
// Inverse kinematics

std::string to_string(const Branch& b) {
    std::string s = b.shoulder == Shoulder::Left ? "shoulder-left" : "shoulder-right";
    s += b.elbow == Elbow::Up ? "/elbow-up" : "/elbow-down";
    s += b.wrist == Wrist::NoFlip ? "/wrist-noflip" : "/wrist-flip";
    return s;
}

namespace {

// acos arguments beyond +-1 by less than this are treated as boundary cases.
constexpr double kAcosSlack = 1e-12;

bool ur_layout(const DHParams& dh) {
    const auto& j = dh.joints;
    constexpr double e = 1e-12;
    return std::abs(j[0].a) < e && std::abs(j[1].d) < e && std::abs(j[2].d) < e && std::abs(j[3].a) < e &&
           std::abs(j[4].a) < e && std::abs(j[5].a) < e && std::abs(j[0].alpha - kPi / 2) < e &&
           std::abs(j[1].alpha) < e && std::abs(j[2].alpha) < e && std::abs(j[3].alpha - kPi / 2) < e &&
           std::abs(j[4].alpha + kPi / 2) < e && std::abs(j[5].alpha) < e && std::abs(j[1].a) > e &&
           std::abs(j[2].a) > e && std::abs(j[5].d) > e;
}

} // namespace

IkResult ik(const Pose& target, const DHParams& dh) {
    if (!target.position.finite() || !target.orientation.finite() ||
        std::abs(target.orientation.norm() - 1.0) > 1e-6) {
        throw InvalidTarget("ik target must be finite with a unit orientation");
    }
    if (!ur_layout(dh)) {
        throw std::invalid_argument("closed-form ik needs the UR joint layout");
    }
    const Pose goal{target.position, geom::quat_normalize(target.orientation)};
    const Frame t06 = Frame::from_pose(goal);
    const auto& r = t06.rotation;
    const Vec3& p = t06.origin;

    const double a2 = dh.joints[1].a, a3 = dh.joints[2].a;
    const double d4 = dh.joints[3].d, d6 = dh.joints[5].d;

    IkResult out;
    // Per-branch slots so the output order is shoulder x elbow x wrist.
    struct Slot {
        bool valid = false;
        JointConfig q;
    };
    std::array<Slot, 8> slots;
    auto slot_index = [](int s, int e, int w) { return s * 4 + e * 2 + w; };
    auto branch_of = [](int s, int e, int w) {
        return Branch{s == 0 ? Shoulder::Left : Shoulder::Right, e == 0 ? Elbow::Up : Elbow::Down,
                      w == 0 ? Wrist::NoFlip : Wrist::Flip};
    };
    auto drop = [&](int s, int e, int w, const char* why) { out.dropped.push_back({branch_of(s, e, w), why}); };

    // Wrist centre: flange origin pulled back along the tool axis.
    const Vec3 p05 = p - Vec3{r[0][2], r[1][2], r[2][2]} * d6;
    const double rxy = std::hypot(p05.x, p05.y);
    if (rxy < std::abs(d4) * (1.0 - kAcosSlack) || p.norm() > dh.reach()) {
        return out;
    }
    const double phi1 = std::atan2(p05.y, p05.x);
    const double phi2 = std::acos(std::clamp(d4 / rxy, -1.0, 1.0));

    for (int s = 0; s < 2; ++s) {
        const double q1 = phi1 + (s == 0 ? phi2 : -phi2) + kPi / 2;
        const double s1 = std::sin(q1), c1 = std::cos(q1);

        // Row of R_16 along the joint-1 y axis: its z entry is cos(q5) and the
        // length of its x/y part is |sin(q5)|. Well conditioned near q5 = 0.
        const double c5 = r[0][2] * s1 - r[1][2] * c1;
        const double s5_abs = std::hypot(r[0][0] * s1 - r[1][0] * c1, r[0][1] * s1 - r[1][1] * c1);

        for (int w = 0; w < 2; ++w) {
            const double q5 = std::atan2(w == 0 ? s5_abs : -s5_abs, c5);
            const double s5 = std::sin(q5);
            if (std::abs(s5) < kWristSingularity) {
                for (int e = 0; e < 2; ++e) drop(s, e, w, "wrist singularity");
                continue;
            }
            const double q6 = std::atan2((-r[0][1] * s1 + r[1][1] * c1) / s5, (r[0][0] * s1 - r[1][0] * c1) / s5);

            const Frame t01 = dh_transform(dh.joints[0], q1);
            const Frame t46 = dh_transform(dh.joints[4], q5) * dh_transform(dh.joints[5], q6);
            const Frame t14 = t01.inverse() * t06 * t46.inverse();
            // Planar shoulder-elbow problem on the origin of frame 3 seen from frame 1.
            const Vec3 p13 = t14.apply({0.0, -d4, 0.0});
            const double px = p13.x, py = p13.y;
            const double reach_sq = px * px + py * py;
            const double c3_raw = (reach_sq - a2 * a2 - a3 * a3) / (2.0 * a2 * a3);
            if (std::abs(c3_raw) > 1.0 + kAcosSlack) {
                for (int e = 0; e < 2; ++e) drop(s, e, w, "elbow out of reach");
                continue;
            }
            const double acos3 = std::acos(std::clamp(c3_raw, -1.0, 1.0));
            const double planar = std::sqrt(reach_sq);

            for (int e = 0; e < 2; ++e) {
                const double q3 = e == 0 ? acos3 : -acos3;
                const double q2 =
                    std::atan2(-py, -px) + std::asin(std::clamp(a3 * std::sin(q3) / planar, -1.0, 1.0));
                const Frame t13 = dh_transform(dh.joints[1], q2) * dh_transform(dh.joints[2], q3);
                const Frame t34 = t13.inverse() * t14;
                const double q4 = std::atan2(t34.rotation[1][0], t34.rotation[0][0]);

                JointConfig q{{q1, q2, q3, q4, q5, q6}};
                q = q.normalized();
                const Pose check = fk(q, dh);
                if ((check.position - goal.position).norm() >= kIkPositionTol ||
                    geom::quat_angle_between(check.orientation, goal.orientation) >= kIkOrientationTol) {
                    drop(s, e, w, "failed forward verification");
                    continue;
                }
                slots[slot_index(s, e, w)] = {true, q};
            }
        }
    }

    for (int s = 0; s < 2; ++s)
        for (int e = 0; e < 2; ++e)
            for (int w = 0; w < 2; ++w) {
                const Slot& slot = slots[slot_index(s, e, w)];
                if (slot.valid) {
                    out.solutions.push_back(slot.q);
                    out.branches.push_back(branch_of(s, e, w));
                }
            }
    return out;
}

JointConfig select_solution(std::span<const JointConfig> solutions, const JointConfig& current,
                            const JointWeights& weights) {
    if (solutions.empty()) {
        throw NoSolution("no inverse kinematics solution to select from");
    }
    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < solutions.size(); ++k) {
        double cost = 0.0;
        for (int i = 0; i < kJoints; ++i) {
            const double d = wrap_angle(solutions[k][i] - current[i]);
            cost += weights[i] * d * d;
        }
        if (cost < best_cost) {
            best_cost = cost;
            best = k;
        }
    }
    return solutions[best];
}

// ---------------------------------------------------------------------------

JointLimits JointLimits::ur3() {
    JointLimits l;
    for (int i = 0; i < kJoints; ++i) {
        l.min[i] = -2.0 * kPi;
        l.max[i] = 2.0 * kPi;
        l.max_velocity[i] = i < 3 ? kPi : 2.0 * kPi;
    }
    return l;
}

LimitCheck check_limits(const JointConfig& q, const JointLimits& lim) {
    LimitCheck out;
    for (int i = 0; i < kJoints; ++i) {
        if (!(q[i] >= lim.min[i] && q[i] <= lim.max[i])) {
            out.violations.push_back(i + 1);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Self-collision

bool CapsuleModel::is_excluded(int i, int j) const {
    return std::any_of(excluded.begin(), excluded.end(), [&](const auto& pr) {
        return (pr.first == i && pr.second == j) || (pr.first == j && pr.second == i);
    });
}

CapsuleModel CapsuleModel::ur_default() {
    CapsuleModel m;
    m.capsules = {
        {"base_column", {0, {0, 0, 0}}, {1, {0, 0, 0}}, 0.06},
        {"upper_arm", {1, {0, 0, 0}}, {2, {0, 0, 0}}, 0.05},
        {"forearm", {2, {0, 0, 0}}, {3, {0, 0, 0}}, 0.05},
        {"wrist_cluster", {3, {0, 0, 0}}, {6, {0, 0, 0}}, 0.045},
    };
    m.excluded = {{0, 1}, {1, 2}, {2, 3}};
    return m;
}

double segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1) {
    // Closest points between two segments (Ericson, Real-Time Collision Detection 5.1.9).
    constexpr double eps = 1e-15;
    const Vec3 d1 = p1 - p0, d2 = q1 - q0, r = p0 - q0;
    const double a = d1.dot(d1), e = d2.dot(d2), f = d2.dot(r);
    double s = 0.0, t = 0.0;
    if (a <= eps && e <= eps) {
        return r.norm();
    }
    if (a <= eps) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = d1.dot(r);
        if (e <= eps) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = d1.dot(d2);
            const double denom = a * e - b * b;
            s = denom > eps * a * e ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    return ((p0 + d1 * s) - (q0 + d2 * t)).norm();
}

CollisionReport collision_report(const JointConfig& q, const CapsuleModel& model, const DHParams& dh) {
    const auto frames = fk_frames(q, dh);
    const auto n = static_cast<int>(model.capsules.size());
    std::vector<std::pair<Vec3, Vec3>> seg(model.capsules.size());
    for (int i = 0; i < n; ++i) {
        const Capsule& c = model.capsules[i];
        seg[i] = {frames.at(c.a.frame).apply(c.a.offset), frames.at(c.b.frame).apply(c.b.offset)};
    }
    CollisionReport rep;
    rep.min_clearance = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (model.is_excluded(i, j)) continue;
            const double dist = segment_distance(seg[i].first, seg[i].second, seg[j].first, seg[j].second);
            const double clearance = dist - (model.capsules[i].radius + model.capsules[j].radius);
            if (clearance < rep.min_clearance) rep.min_clearance = clearance;
            if (clearance < 0.0 && !rep.colliding) {
                rep.colliding = true;
                rep.first = i;
                rep.second = j;
            }
        }
    }
    return rep;
}

bool self_collision(const JointConfig& q, const CapsuleModel& model, const DHParams& dh) {
    return collision_report(q, model, dh).colliding;
}

} // namespace viewvr::kin
