#pragma once

#include <span>
#include <stdexcept>

namespace viewvr::sim {

class EmptyMetrics : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// sqrt(mean(e^2)). Throws EmptyMetrics on an empty stream.
double rms(std::span<const double> samples);

/// Nearest-rank percentile, p in (0, 100]: the ceil(p/100 * N)-th smallest sample.
double percentile(std::span<const double> samples, double p);

} // namespace viewvr::sim
