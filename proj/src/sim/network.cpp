#include "viewvr/sim/network.hpp"

#include <algorithm>
#include <cmath>

namespace viewvr::sim {

std::vector<std::int64_t> network_deliver(const NetworkModel& model, DetRng& rng, std::int64_t t_send_us) {
    const double u_drop = rng.uniform();
    const double u_jitter = rng.uniform();
    const double u_dup = rng.uniform();
    const double u_dup_jitter = rng.uniform();

    auto arrival = [&](double u) {
        const double offset_us = model.latency_ms * 1000.0 + (2.0 * u - 1.0) * model.jitter_ms * 1000.0;
        return t_send_us + std::max<std::int64_t>(0, std::llround(offset_us));
    };
    std::vector<std::int64_t> out;
    if (u_drop < model.drop) return out;
    out.push_back(arrival(u_jitter));
    if (u_dup < model.duplicate) out.push_back(arrival(u_dup_jitter));
    return out;
}

void NetLink::send(std::vector<std::uint8_t> bytes, std::int64_t t_us) {
    const auto arrivals = network_deliver(model_, rng_, t_us);
    ++stats_.sent;
    if (arrivals.empty()) {
        ++stats_.dropped;
        return;
    }
    if (arrivals.size() > 1) {
        ++stats_.sent;
        ++stats_.duplicated;
    }
    for (std::size_t i = 0; i < arrivals.size(); ++i) {
        Packet p{t_us, arrivals[i], i + 1 == arrivals.size() ? std::move(bytes) : bytes};
        queue_.push({arrivals[i], order_++, std::move(p)});
        ++stats_.in_flight;
    }
}

std::vector<Packet> NetLink::deliver(std::int64_t now_us) {
    std::vector<Packet> out;
    while (!queue_.empty() && queue_.top().arrival_us <= now_us) {
        out.push_back(queue_.top().packet);
        queue_.pop();
        --stats_.in_flight;
        ++stats_.delivered;
    }
    return out;
}

} // namespace viewvr::sim
