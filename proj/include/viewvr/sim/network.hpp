#pragma once

// Seeded one-way link: fixed latency, uniform jitter, drops and duplicates.

#include <cstdint>
#include <queue>
#include <random>
#include <vector>

namespace viewvr::sim {

struct NetworkModel {
    double latency_ms = 0.0;
    double jitter_ms = 0.0;  // arrival offset drawn from U(-J, J)
    double drop = 0.0;
    double duplicate = 0.0;

    bool operator==(const NetworkModel&) const = default;
};

/// mt19937_64 with a fixed bits-to-double mapping, so draws match across
/// standard libraries.
class DetRng {
public:
    explicit DetRng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

/// Arrival times for one datagram sent at t_send_us: empty when dropped, two
/// entries when the network duplicates it. Always consumes four draws.
std::vector<std::int64_t> network_deliver(const NetworkModel& model, DetRng& rng, std::int64_t t_send_us);

struct LinkStats {
    std::uint64_t sent = 0;        // datagrams on the wire, duplicates included
    std::uint64_t duplicated = 0;  // copies the network added
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t in_flight = 0;
    std::uint64_t stale = 0;       // delivered but refused by the freshness filter

    bool operator==(const LinkStats&) const = default;
};

struct Packet {
    std::int64_t sent_us = 0;
    std::int64_t arrival_us = 0;
    std::vector<std::uint8_t> bytes;
};

class NetLink {
public:
    NetLink(const NetworkModel& model, std::uint64_t seed) : model_(model), rng_(seed) {}

    void send(std::vector<std::uint8_t> bytes, std::int64_t t_us);
    /// Packets with arrival <= now_us, by arrival time then send order.
    std::vector<Packet> deliver(std::int64_t now_us);

    void mark_stale() { ++stats_.stale; }
    const LinkStats& stats() const { return stats_; }

private:
    struct Pending {
        std::int64_t arrival_us;
        std::uint64_t order;
        Packet packet;
    };
    struct Later {
        bool operator()(const Pending& a, const Pending& b) const {
            return a.arrival_us != b.arrival_us ? a.arrival_us > b.arrival_us : a.order > b.order;
        }
    };

    NetworkModel model_;
    DetRng rng_;
    std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
    std::uint64_t order_ = 0;
    LinkStats stats_;
};

} // namespace viewvr::sim
