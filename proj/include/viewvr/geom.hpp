#pragma once

// Spatial math shared by every other module.
//
// Conventions:
//   * Quaternions are stored (w, x, y, z) and follow the Hamilton convention.
//   * a * b composes rotations so that rotate_point(a * b, p) == a(b(p)):
//     b is applied first, then a.
//   * Operator head frame: x forward, y left, z up.
//   * to_roll_pitch decomposes intrinsic Z-Y-X (yaw, pitch, roll) and drops yaw.

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace viewvr::geom {

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

class DegenerateRotation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr bool operator==(const Vec3&) const = default;

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

    constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    constexpr Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

struct Quat {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr bool operator==(const Quat&) const = default;

    static constexpr Quat identity() { return {}; }
    /// Rotation of `angle` radians about `axis` (need not be unit, must be non-zero).
    static Quat from_axis_angle(const Vec3& axis, double angle);

    constexpr Quat conjugate() const { return {w, -x, -y, -z}; }
    constexpr double norm_sq() const { return w * w + x * x + y * y + z * z; }
    double norm() const { return std::sqrt(norm_sq()); }
    bool finite() const {
        return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

/// Unit quaternion with the same direction. Throws DegenerateRotation on zero or
/// non-finite norm.
Quat quat_normalize(const Quat& q);

/// Hamilton product a * b, renormalized.
Quat quat_mul(const Quat& a, const Quat& b);

/// Inverse of a unit quaternion (its conjugate).
inline constexpr Quat quat_inverse(const Quat& q) { return q.conjugate(); }

Vec3 rotate_point(const Quat& q, const Vec3& p);

/// Rotation angle in [0, pi] of the relative rotation between a and b.
double quat_angle_between(const Quat& a, const Quat& b);

/// Row-major 3x3 rotation matrix.
using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 to_matrix(const Quat& q);
/// Quaternion of a proper rotation matrix (Shepperd's method), w >= 0.
Quat from_matrix(const Mat3& m);

struct Pose {
    Vec3 position;
    Quat orientation;

    constexpr bool operator==(const Pose&) const = default;
    static constexpr Pose identity() { return {}; }
};

/// a ∘ b: the pose b expressed in a's parent frame.
Pose compose_pose(const Pose& a, const Pose& b);
Pose invert_pose(const Pose& a);
inline Vec3 transform_point(const Pose& a, const Vec3& p) {
    return a.position + rotate_point(a.orientation, p);
}

struct RollPitch {
    double roll = 0.0;
    double pitch = 0.0;

    constexpr bool operator==(const RollPitch&) const = default;
};

struct RollPitchResult {
    RollPitch angles;
    /// Set when |pitch| is within 1e-6 of pi/2; roll is then ill-conditioned.
    bool degenerate = false;
};

inline constexpr double kGimbalMargin = 1e-6;

RollPitchResult to_roll_pitch(const Quat& q);
Quat from_roll_pitch(double roll, double pitch, double yaw = 0.0);
/// Yaw angle of the same intrinsic Z-Y-X decomposition.
double to_yaw(const Quat& q);

/// Which headset angle drives the head's first channel. The default follows the
/// literal roll/pitch assignment; YawPitch suits pan-tilt rigs.
enum class HeadChannelMap { RollPitch, YawPitch };

RollPitchResult to_head_angles(const Quat& q, HeadChannelMap map);

} // namespace viewvr::geom
