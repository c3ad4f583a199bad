#include "viewvr/sim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace viewvr::sim {

double rms(std::span<const double> samples) {
    if (samples.empty()) throw EmptyMetrics("rms of an empty stream");
    double sum = 0.0;
    for (double e : samples) sum += e * e;
    return std::sqrt(sum / static_cast<double>(samples.size()));
}

double percentile(std::span<const double> samples, double p) {
    if (samples.empty()) throw EmptyMetrics("percentile of an empty stream");
    if (!(p > 0.0 && p <= 100.0)) throw std::invalid_argument("percentile must lie in (0, 100]");
    std::vector<double> v(samples.begin(), samples.end());
    std::sort(v.begin(), v.end());
    const auto n = static_cast<double>(v.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, v.size());
    return v[rank - 1];
}

} // namespace viewvr::sim
