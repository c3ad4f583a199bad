#pragma once

// Operator-space to robot-space mapping: hand pose -> end-effector target,
// headset orientation -> head angles, thumb/index angle -> gripper aperture.

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string_view>

#include "viewvr/geom.hpp"

namespace viewvr::retarget {

using geom::Pose;
using geom::Quat;
using geom::RollPitch;
using geom::Vec3;

class InvalidCalibration : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Calibration {
    Pose hand_origin;
    Pose ee_origin;
    Quat frame_align;
    double scale = 1.0;
    Quat head_origin;
};

/// Snapshots the operator and robot poses that define the retarget origin.
/// Throws InvalidCalibration unless scale > 0 (and finite).
Calibration calibrate(const Pose& hand_pose, const Pose& ee_pose, const Quat& head_quat,
                      const Quat& frame_align = Quat::identity(), double scale = 1.0);

/// Relative retarget: hand displacement and rotation since calibration, expressed
/// in robot axes, applied on top of the calibrated end-effector pose.
///
///   p = ee.p + s * R_align (hand.p - hand0.p)
///   q = align * hand.q * hand0.q^-1 * align^-1 * ee.q
Pose map_hand(const Calibration& cal, const Pose& hand);

struct HeadLimits {
    double roll_min = geom::deg_to_rad(-60.0);
    double roll_max = geom::deg_to_rad(60.0);
    double pitch_min = geom::deg_to_rad(-45.0);
    double pitch_max = geom::deg_to_rad(60.0);
};

struct HeadMapping {
    RollPitch angles;
    bool degenerate = false;
};

HeadMapping map_head(const Calibration& cal, const Quat& head, const HeadLimits& limits,
                     geom::HeadChannelMap channels = geom::HeadChannelMap::RollPitch);

struct PinchConfig {
    double angle_closed_deg = 10.0;
    double angle_open_deg = 60.0;
};

/// Linear thumb/index angle -> aperture, 0 at angle_closed, 1 at angle_open, clamped.
double map_pinch(double angle_deg, const PinchConfig& cfg = {});

enum class Camera : std::uint8_t { Wrist = 0, Head = 1 };

const char* to_string(Camera c);
std::optional<Camera> camera_from_string(std::string_view s);

inline constexpr double kCameraDebounceS = 0.2;

struct GripperState {
    double aperture = 1.0;
    Camera active_camera = Camera::Wrist;
    double last_toggle_time = -std::numeric_limits<double>::infinity();

    bool operator==(const GripperState&) const = default;
};

/// Camera button press at time t. Presses within 200 ms of the last accepted
/// press are ignored.
GripperState toggle_camera(const GripperState& state, double t);

/// Optional clutch on top of map_hand. While engaged the output holds; on
/// release the calibration re-anchors so the end effector does not jump.
class ClutchedRetarget {
public:
    explicit ClutchedRetarget(Calibration cal) : cal_(cal), last_(cal.ee_origin) {}

    Pose update(const Pose& hand, bool clutch_engaged);
    const Calibration& calibration() const { return cal_; }

private:
    Calibration cal_;
    Pose last_;
    bool engaged_ = false;
};

} // namespace viewvr::retarget
