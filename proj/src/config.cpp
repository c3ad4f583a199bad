#include "viewvr/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

namespace viewvr::config {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double parse_value(const std::string& text, const std::string& source, int line) {
    std::string num = text;
    double unit = 1.0;
    if (num.size() > 3 && num.compare(num.size() - 3, 3, "deg") == 0) {
        num = trim(num.substr(0, num.size() - 3));
        unit = geom::kPi / 180.0;
    }
    double v = 0.0;
    const char* first = num.data();
    const char* last = first + num.size();
    if (!num.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        throw ConfigError(source, line, "not a finite number: '" + text + "'");
    }
    return v * unit;
}

const Entry& require(const Entries& e, const std::string& key, const std::string& source) {
    const auto it = e.find(key);
    if (it == e.end()) throw ConfigError(source, 0, "missing key '" + key + "'");
    return it->second;
}

void reject_unknown(const Entries& e, const std::set<std::string>& known, const std::string& source) {
    for (const auto& [k, v] : e) {
        if (!known.contains(k)) throw ConfigError(source, v.line, "unknown key '" + k + "'");
    }
}

std::ifstream open(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), 0, "cannot open file");
    return in;
}

} // namespace

ConfigError::ConfigError(std::string source, int line, const std::string& what)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + what),
      source_(std::move(source)),
      line_(line) {}

Entries parse_entries(std::istream& in, const std::string& source) {
    Entries out;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string s = trim(raw);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(source, line, "expected 'key = value'");
        const std::string key = trim(std::string_view(s).substr(0, eq));
        const std::string val = trim(std::string_view(s).substr(eq + 1));
        if (key.empty()) throw ConfigError(source, line, "empty key");
        if (out.contains(key)) throw ConfigError(source, line, "duplicate key '" + key + "'");
        out[key] = {parse_value(val, source, line), line};
    }
    return out;
}

kin::DHParams parse_dh(std::istream& in, const std::string& source) {
    const Entries e = parse_entries(in, source);
    std::set<std::string> known;
    kin::DHParams dh;
    for (int i = 0; i < kin::kJoints; ++i) {
        const std::string p = "joint" + std::to_string(i + 1) + ".";
        for (const char* f : {"a", "d", "alpha"}) known.insert(p + f);
        dh.joints[i].a = require(e, p + "a", source).value;
        dh.joints[i].d = require(e, p + "d", source).value;
        dh.joints[i].alpha = require(e, p + "alpha", source).value;
    }
    reject_unknown(e, known, source);
    return dh;
}

kin::JointLimits parse_limits(std::istream& in, const std::string& source) {
    const Entries e = parse_entries(in, source);
    std::set<std::string> known;
    kin::JointLimits lim;
    for (int i = 0; i < kin::kJoints; ++i) {
        const std::string p = "joint" + std::to_string(i + 1) + ".";
        for (const char* f : {"min", "max", "max_velocity"}) known.insert(p + f);
        lim.min[i] = require(e, p + "min", source).value;
        const Entry& mx = require(e, p + "max", source);
        lim.max[i] = mx.value;
        const Entry& vel = require(e, p + "max_velocity", source);
        lim.max_velocity[i] = vel.value;
        if (!(lim.min[i] < lim.max[i])) throw ConfigError(source, mx.line, "min must be below max");
        if (!(vel.value > 0.0)) throw ConfigError(source, vel.line, "max_velocity must be positive");
    }
    reject_unknown(e, known, source);
    return lim;
}

kin::DHParams load_dh(const std::filesystem::path& path) {
    auto in = open(path);
    return parse_dh(in, path.string());
}

kin::JointLimits load_limits(const std::filesystem::path& path) {
    auto in = open(path);
    return parse_limits(in, path.string());
}

} // namespace viewvr::config
