#pragma once

// UR-family arm kinematics: forward kinematics over standard DH parameters,
// closed-form inverse kinematics with full branch enumeration, joint limits,
// and a capsule-based self-collision proxy.

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "viewvr/geom.hpp"

namespace viewvr::kin {

using geom::Mat3;
using geom::Pose;
using geom::Vec3;

inline constexpr int kJoints = 6;

class InvalidTarget : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NoSolution : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct JointConfig {
    std::array<double, kJoints> q{};

    double& operator[](std::size_t i) { return q[i]; }
    double operator[](std::size_t i) const { return q[i]; }
    bool operator==(const JointConfig&) const = default;

    bool finite() const;
    /// Every joint wrapped into (-pi, pi].
    JointConfig normalized() const;
};

/// Euclidean norm of the per-joint wrapped differences.
double joint_distance(const JointConfig& a, const JointConfig& b);

/// `q` shifted joint-wise by multiples of 2*pi to lie nearest `reference`.
JointConfig unwrap_near(const JointConfig& q, const JointConfig& reference);

struct DhJoint {
    double a = 0.0;      // m
    double d = 0.0;      // m
    double alpha = 0.0;  // rad
};

struct DHParams {
    std::array<DhJoint, kJoints> joints{};

    static DHParams ur3();
    /// Sum of link lengths; an upper bound on the flange distance from the base.
    double reach() const;
};

/// Rigid transform in matrix form, used for the chain products.
struct Frame {
    Mat3 rotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    Vec3 origin;

    Vec3 apply(const Vec3& p) const;
    Frame operator*(const Frame& o) const;
    Frame inverse() const;

    static Frame from_pose(const Pose& p);
    Pose to_pose() const;
};

Frame dh_transform(const DhJoint& j, double theta);

/// Base frame followed by the frame after each joint (index 6 = tool flange).
std::array<Frame, kJoints + 1> fk_frames(const JointConfig& q, const DHParams& dh);

Pose fk(const JointConfig& q, const DHParams& dh);

enum class Shoulder : std::uint8_t { Left, Right };
enum class Elbow : std::uint8_t { Up, Down };
enum class Wrist : std::uint8_t { NoFlip, Flip };

struct Branch {
    Shoulder shoulder;
    Elbow elbow;
    Wrist wrist;
};

std::string to_string(const Branch& b);

struct IkDiagnostic {
    Branch branch;
    std::string reason;
};

struct IkResult {
    std::vector<JointConfig> solutions;
    std::vector<Branch> branches;          // parallel to `solutions`
    std::vector<IkDiagnostic> dropped;     // branches that exist but were rejected
};

inline constexpr double kIkPositionTol = 1e-9;
inline constexpr double kIkOrientationTol = 1e-9;
inline constexpr double kWristSingularity = 1e-8;

/// Closed-form inverse kinematics for the UR joint layout. Returns up to eight
/// solutions ordered shoulder x elbow x wrist, each re-verified through fk.
/// Unreachable targets yield an empty list. Throws InvalidTarget when the
/// orientation is not unit within 1e-6 or the pose is not finite.
IkResult ik(const Pose& target, const DHParams& dh);

using JointWeights = std::array<double, kJoints>;
inline constexpr JointWeights kUnitWeights{1, 1, 1, 1, 1, 1};

/// Nearest solution to `current` in weighted, wrapped joint space; ties go to the
/// earliest entry. Throws NoSolution on an empty list.
JointConfig select_solution(std::span<const JointConfig> solutions, const JointConfig& current,
                            const JointWeights& weights = kUnitWeights);

struct JointLimits {
    std::array<double, kJoints> min{};
    std::array<double, kJoints> max{};
    std::array<double, kJoints> max_velocity{};

    /// UR3 hardware ranges (+-360 deg) and speed limits (180 / 360 deg/s).
    static JointLimits ur3();
};

struct LimitCheck {
    /// 1-based joint numbers (q1..q6) outside their inclusive bounds.
    std::vector<int> violations;

    bool ok() const { return violations.empty(); }
};

LimitCheck check_limits(const JointConfig& q, const JointLimits& lim);

// ---------------------------------------------------------------------------
// Self-collision proxy

/// Point fixed in one of the fk frames (0 = base ... 6 = flange).
struct FramePoint {
    int frame = 0;
    Vec3 offset;
};

struct Capsule {
    std::string name;
    FramePoint a;
    FramePoint b;
    double radius = 0.0;
};

struct CapsuleModel {
    std::vector<Capsule> capsules;
    /// Capsule index pairs that are never tested (adjacent links touch by design).
    std::vector<std::pair<int, int>> excluded;

    bool is_excluded(int i, int j) const;

    /// Four capsules (base column, upper arm, forearm, wrist cluster) sized
    /// conservatively; a stand-in, not the manufacturer's collision geometry.
    static CapsuleModel ur_default();
};

/// Minimum distance between segments [p0, p1] and [q0, q1].
double segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1);

struct CollisionReport {
    bool colliding = false;
    int first = -1;
    int second = -1;
    double min_clearance = 0.0;  // smallest (distance - radii) over tested pairs
};

CollisionReport collision_report(const JointConfig& q, const CapsuleModel& model, const DHParams& dh);

bool self_collision(const JointConfig& q, const CapsuleModel& model, const DHParams& dh);

} // namespace viewvr::kin
