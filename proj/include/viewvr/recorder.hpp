#pragma once

// Session capture for datasets: one JSON object per line, fields
// t_us, op_hand, op_head, pinch, joints, head, aperture, camera, estop.
// Doubles are written in shortest round-trip form, so load(save(s)) == s.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include "viewvr/geom.hpp"
#include "viewvr/retarget.hpp"

namespace viewvr::rec {

class OrderError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& what);
    int line() const { return line_; }

private:
    int line_;
};

struct Frame {
    std::int64_t t_us = 0;
    geom::Pose op_hand;
    geom::Quat op_head;
    double pinch = 0.0;  // degrees
    std::array<double, 6> joints{};
    geom::RollPitch head;
    double aperture = 1.0;
    retarget::Camera camera = retarget::Camera::Wrist;
    bool estop = false;

    bool operator==(const Frame&) const = default;
};

/// Operator-side inputs at one instant.
struct OperatorSample {
    std::int64_t t_us = 0;
    geom::Pose hand;
    geom::Quat head;
    double pinch = 0.0;  // degrees

    bool operator==(const OperatorSample&) const = default;
};

struct Session {
    std::vector<Frame> frames;
};

/// Throws OrderError unless frame.t_us is later than the last frame's.
void append(Session& session, const Frame& frame);

std::string to_line(const Frame& f);
/// Parses one record; `line` only labels the ParseError.
Frame from_line(const std::string& text, int line);

void save(const Session& s, const std::filesystem::path& path);
Session load(std::istream& in);
Session load(const std::filesystem::path& path);

/// Operator input stream carried by the session, in time order.
std::vector<OperatorSample> replay(const Session& s);

/// Streams frames to disk as they are appended.
class SessionWriter {
public:
    explicit SessionWriter(const std::filesystem::path& path);

    void append(const Frame& f);
    std::size_t size() const { return count_; }

private:
    std::ofstream out_;
    std::int64_t last_t_ = 0;
    std::size_t count_ = 0;
};

} // namespace viewvr::rec
