#pragma once

// Live service: the simulated robot driven in real time by UDP command
// datagrams and console bridge clients.
//
// Three threads, each owning its own state:
//   receiver  UDP command socket and its freshness filter
//   bridge    TCP listener, client set, per-client freshness and send queues
//   control   the robot (plants and supervisor), 1 ms steps, telemetry
// They talk through mutex-guarded queues; the control loop never waits on a
// socket and is the only writer of robot state.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "viewvr/robot.hpp"
#include "viewvr/sim/network.hpp"

namespace viewvr::teleopd {

inline constexpr std::uint16_t kDefaultBridgePort = 46003;

enum class Mode { Scenario, Replay, Live };

struct ServiceConfig {
    std::uint16_t command_port = 46001;    // 0 picks a free port
    std::uint16_t telemetry_port = 46002;  // where telemetry goes on the command sender's host
    std::uint16_t bridge_port = kDefaultBridgePort;
    std::string bind_address = "127.0.0.1";
    std::filesystem::path dh_file;      // empty: built-in UR3 values
    std::filesystem::path limits_file;  // empty: built-in UR3 values
    sim::NetworkModel net;
    std::filesystem::path scenario;
    std::uint64_t seed = 0;
    Mode mode = Mode::Live;
    std::optional<std::filesystem::path> record;
    double watchdog_ms = 250.0;
    std::size_t client_queue_bytes = 64 * 1024;  // per bridge client; telemetry beyond this is dropped
};

/// VIEWVR_CMD_PORT, VIEWVR_TLM_PORT, VIEWVR_BRIDGE_PORT, VIEWVR_DH_FILE and
/// VIEWVR_LIMITS_FILE override the matching fields. Throws
/// std::invalid_argument on an unparsable port.
using EnvLookup = std::function<const char*(const char*)>;
void apply_env(ServiceConfig& cfg, const EnvLookup& lookup);

/// Checks ports are distinct and configured files exist; returns a message or nothing.
std::optional<std::string> check(const ServiceConfig& cfg);

/// Robot settings implied by the config (DH and limits files, watchdog).
robot::RobotConfig robot_config(const ServiceConfig& cfg);

struct ServiceStats {
    std::uint64_t steps = 0;
    std::uint64_t udp_accepted = 0;
    std::uint64_t udp_rejected = 0;  // failed decode
    std::uint64_t udp_stale = 0;
    std::uint64_t bridge_clients = 0;
    std::uint64_t bridge_accepted = 0;
    std::uint64_t bridge_errors = 0;
    std::uint64_t bridge_stale = 0;
    std::uint64_t telemetry_frames = 0;
    std::uint64_t telemetry_dropped = 0;  // frames skipped for slow clients
    std::uint64_t head_ticks = 0;
    std::int64_t head_tick_spacing_min_us = 0;
    std::int64_t head_tick_spacing_max_us = 0;
};

class Service {
public:
    /// Binds the sockets; throws std::system_error when a port is taken.
    explicit Service(const ServiceConfig& cfg);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    void start();
    void stop();

    std::uint16_t command_port() const;
    std::uint16_t bridge_port() const;
    ServiceStats stats() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace viewvr::teleopd
