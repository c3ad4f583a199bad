#include "viewvr/geom.hpp"

#include <algorithm>

namespace viewvr::geom {

double wrap_angle(double a) {
    double r = std::remainder(a, 2.0 * kPi);
    if (r <= -kPi) {
        r += 2.0 * kPi;
    }
    return r;
}

Quat Quat::from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw DegenerateRotation("axis-angle rotation needs a non-zero finite axis");
    }
    const double s = std::sin(0.5 * angle) / n;
    return quat_normalize({std::cos(0.5 * angle), axis.x * s, axis.y * s, axis.z * s});
}

Quat quat_normalize(const Quat& q) {
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw DegenerateRotation("cannot normalize a zero or non-finite quaternion");
    }
    // Already unit to rounding: leave untouched so normalization is idempotent.
    if (std::abs(n - 1.0) <= 1e-14) {
        return q;
    }
    return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Quat quat_mul(const Quat& a, const Quat& b) {
    return quat_normalize({
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    });
}

Vec3 rotate_point(const Quat& q, const Vec3& p) {
    // p' = p + 2w(u x p) + 2u x (u x p)
    const Vec3 u{q.x, q.y, q.z};
    const Vec3 t = u.cross(p) * 2.0;
    return p + t * q.w + u.cross(t);
}

double quat_angle_between(const Quat& a, const Quat& b) {
    const Quat d = quat_mul(quat_inverse(a), b);
    const double v = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
    return 2.0 * std::atan2(v, std::abs(d.w));
}

Mat3 to_matrix(const Quat& q) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
             {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
             {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

Quat from_matrix(const Mat3& m) {
    const double tr = m[0][0] + m[1][1] + m[2][2];
    Quat q;
    if (tr > 0.0) {
        const double s = 2.0 * std::sqrt(1.0 + tr);
        q = {0.25 * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s};
    } else if (m[0][0] > m[1][1] && m[0][0] > m[2][2]) {
        const double s = 2.0 * std::sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]);
        q = {(m[2][1] - m[1][2]) / s, 0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s};
    } else if (m[1][1] > m[2][2]) {
        const double s = 2.0 * std::sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]);
        q = {(m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s};
    } else {
        const double s = 2.0 * std::sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]);
        q = {(m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s};
    }
    if (q.w < 0.0) {
        q = {-q.w, -q.x, -q.y, -q.z};
    }
    return quat_normalize(q);
}

Pose compose_pose(const Pose& a, const Pose& b) {
    return {a.position + rotate_point(a.orientation, b.position),
            quat_mul(a.orientation, b.orientation)};
}

Pose invert_pose(const Pose& a) {
    const Quat inv = quat_inverse(a.orientation);
    return {-rotate_point(inv, a.position), inv};
}

RollPitchResult to_roll_pitch(const Quat& q) {
    const double sinp = std::clamp(2.0 * (q.w * q.y - q.z * q.x), -1.0, 1.0);
    RollPitchResult out;
    out.angles.pitch = std::asin(sinp);
    double roll = std::atan2(2.0 * (q.w * q.x + q.y * q.z), 1.0 - 2.0 * (q.x * q.x + q.y * q.y));
    if (roll <= -kPi) {
        roll = kPi;
    }
    out.angles.roll = roll;
    out.degenerate = std::abs(std::abs(out.angles.pitch) - 0.5 * kPi) < kGimbalMargin;
    return out;
}

double to_yaw(const Quat& q) {
    return std::atan2(2.0 * (q.w * q.z + q.x * q.y), 1.0 - 2.0 * (q.y * q.y + q.z * q.z));
}

Quat from_roll_pitch(double roll, double pitch, double yaw) {
    const double cr = std::cos(0.5 * roll), sr = std::sin(0.5 * roll);
    const double cp = std::cos(0.5 * pitch), sp = std::sin(0.5 * pitch);
    const double cy = std::cos(0.5 * yaw), sy = std::sin(0.5 * yaw);
    // Rz(yaw) * Ry(pitch) * Rx(roll)
    return quat_normalize({
        cy * cp * cr + sy * sp * sr,
        cy * cp * sr - sy * sp * cr,
        cy * sp * cr + sy * cp * sr,
        sy * cp * cr - cy * sp * sr,
    });
}

RollPitchResult to_head_angles(const Quat& q, HeadChannelMap map) {
    RollPitchResult r = to_roll_pitch(q);
    if (map == HeadChannelMap::YawPitch) {
        r.angles.roll = to_yaw(q);
    }
    return r;
}

} // namespace viewvr::geom
