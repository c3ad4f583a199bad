#include "viewvr/retarget.hpp"

#include <algorithm>
#include <cmath>

namespace viewvr::retarget {

using geom::quat_inverse;
using geom::quat_mul;

Calibration calibrate(const Pose& hand_pose, const Pose& ee_pose, const Quat& head_quat,
                      const Quat& frame_align, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw InvalidCalibration("retarget scale must be positive and finite");
    }
    Calibration cal;
    cal.hand_origin = hand_pose;
    cal.ee_origin = ee_pose;
    cal.frame_align = geom::quat_normalize(frame_align);
    cal.scale = scale;
    cal.head_origin = head_quat;
    return cal;
}

Pose map_hand(const Calibration& cal, const Pose& hand) {
    const Vec3 delta = hand.position - cal.hand_origin.position;
    Pose out;
    out.position = cal.ee_origin.position + geom::rotate_point(cal.frame_align, delta) * cal.scale;

    const Quat rel = quat_mul(hand.orientation, quat_inverse(cal.hand_origin.orientation));
    const Quat rel_robot = quat_mul(quat_mul(cal.frame_align, rel), quat_inverse(cal.frame_align));
    out.orientation = quat_mul(rel_robot, cal.ee_origin.orientation);
    return out;
}

HeadMapping map_head(const Calibration& cal, const Quat& head, const HeadLimits& limits,
                     geom::HeadChannelMap channels) {
    const Quat rel = quat_mul(head, quat_inverse(cal.head_origin));
    const auto rp = geom::to_head_angles(rel, channels);
    HeadMapping out;
    out.degenerate = rp.degenerate;
    out.angles.roll = std::clamp(rp.angles.roll, limits.roll_min, limits.roll_max);
    out.angles.pitch = std::clamp(rp.angles.pitch, limits.pitch_min, limits.pitch_max);
    return out;
}

double map_pinch(double angle_deg, const PinchConfig& cfg) {
    const double t = (angle_deg - cfg.angle_closed_deg) / (cfg.angle_open_deg - cfg.angle_closed_deg);
    if (std::isnan(t)) {
        return 0.0;
    }
    return std::clamp(t, 0.0, 1.0);
}

const char* to_string(Camera c) { return c == Camera::Head ? "head" : "wrist"; }

std::optional<Camera> camera_from_string(std::string_view s) {
    if (s == "wrist") return Camera::Wrist;
    if (s == "head") return Camera::Head;
    return std::nullopt;
}

GripperState toggle_camera(const GripperState& state, double t) {
    // 1 ns slack so a press exactly at the window edge is not lost to rounding.
    if (t - state.last_toggle_time < kCameraDebounceS - 1e-9) {
        return state;
    }
    GripperState next = state;
    next.active_camera = state.active_camera == Camera::Wrist ? Camera::Head : Camera::Wrist;
    next.last_toggle_time = t;
    return next;
}

Pose ClutchedRetarget::update(const Pose& hand, bool clutch_engaged) {
    if (clutch_engaged) {
        engaged_ = true;
        return last_;
    }
    if (engaged_) {
        cal_.hand_origin = hand;
        cal_.ee_origin = last_;
        engaged_ = false;
    }
    last_ = map_hand(cal_, hand);
    return last_;
}

} // namespace viewvr::retarget
