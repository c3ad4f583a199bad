#pragma once

// Scenario scripts: timed operator keyframes, world settings and ordered goal
// checks. The text format is documented in docs/scenario-format.md.

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "viewvr/geom.hpp"
#include "viewvr/kinematics.hpp"
#include "viewvr/retarget.hpp"
#include "viewvr/sim/network.hpp"

namespace viewvr::sim {

class ScriptError : public std::runtime_error {
public:
    ScriptError(std::string source, int line, std::string field, const std::string& what);

    const std::string& source() const { return source_; }
    int line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    std::string source_;
    int line_;
    std::string field_;
};

struct Keyframe {
    double t = 0.0;
    geom::Pose hand;
    geom::Quat head;
    double pinch = 60.0;  // degrees
};

enum class GoalKind { EePosition, EeTilt, Aperture, Head, Camera };

struct Goal {
    std::string name;
    GoalKind kind = GoalKind::EePosition;
    geom::Vec3 position;          // EePosition
    double value = 0.0;           // EeTilt angle (rad), Aperture threshold
    bool above = false;           // Aperture: above or below `value`
    geom::RollPitch head;         // Head (rad)
    retarget::Camera camera = retarget::Camera::Wrist;
    double tol = 0.0;             // m or rad
    double by = 0.0;              // deadline, s
    double hold = 0.0;            // condition must hold this long, s
    int line = 0;
};

struct Interval {
    double from = 0.0;
    double to = 0.0;
};

struct JointRangeOverride {
    int joint = 0;  // 0-based
    double min = 0.0;
    double max = 0.0;
};

struct ScenarioScript {
    std::string name = "unnamed";
    std::uint64_t seed = 0;
    double duration = 0.0;  // 0: derived from the script contents
    NetworkModel net;
    kin::JointConfig arm_init{{0.0, -geom::kPi / 2, geom::kPi / 2, -geom::kPi / 2, -geom::kPi / 2, 0.0}};
    bool head_homed = true;
    geom::RollPitch head_start;  // plant angles when starting unhomed
    std::vector<JointRangeOverride> limits;
    geom::Quat align;
    double scale = 1.0;
    geom::HeadChannelMap head_map = geom::HeadChannelMap::RollPitch;
    bool motor_unconstrained = false;
    double watchdog_ms = 250.0;

    std::vector<Keyframe> keyframes;
    std::vector<double> toggles;
    std::vector<Interval> pauses;
    std::vector<double> estops;
    std::vector<double> resets;
    std::vector<Goal> goals;

    /// Sim time the run covers.
    double effective_duration() const;
};

ScenarioScript parse_scenario(std::istream& in, const std::string& source = "<scenario>");
ScenarioScript load_scenario(const std::filesystem::path& path);

/// Operator inputs at time t: linear in position and pinch, spherical in
/// orientation, held before the first and after the last keyframe.
struct OperatorState {
    geom::Pose hand;
    geom::Quat head;
    double pinch = 0.0;
};

OperatorState interpolate(const std::vector<Keyframe>& keys, double t);

geom::Quat slerp(const geom::Quat& a, const geom::Quat& b, double u);

} // namespace viewvr::sim
