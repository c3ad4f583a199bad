#pragma once

// Flat key = value configuration files for the arm model.
//
//   # comment
//   joint1.a = 0
//   joint1.alpha = 90 deg
//
// Numbers may carry a trailing "deg" unit; everything else is SI.

#include <filesystem>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>

#include "viewvr/kinematics.hpp"

namespace viewvr::config {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string source, int line, const std::string& what);

    const std::string& source() const { return source_; }
    /// 1-based; 0 when the problem is not tied to a line (e.g. a missing key).
    int line() const { return line_; }

private:
    std::string source_;
    int line_;
};

struct Entry {
    double value = 0.0;
    int line = 0;
};

using Entries = std::map<std::string, Entry>;

Entries parse_entries(std::istream& in, const std::string& source);

kin::DHParams parse_dh(std::istream& in, const std::string& source = "<dh>");
kin::JointLimits parse_limits(std::istream& in, const std::string& source = "<limits>");

kin::DHParams load_dh(const std::filesystem::path& path);
kin::JointLimits load_limits(const std::filesystem::path& path);

} // namespace viewvr::config
