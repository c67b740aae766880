#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace twophoton {

struct ScanPoint {
    double x = 0.0;
    double rate = 0.0;
    std::int64_t counts = 0;
    double std_error = 0.0; // Monte Carlo standard error of rate
};

struct ScanMeta {
    std::uint64_t seed = 0;
    std::uint64_t trials = 0;
    std::string apparatus_summary;
    double dwell = 0.0;      // seconds per point used for count synthesis
    double rate_scale = 0.0; // counts per second at unit rate
    std::optional<double> acceptance_fraction;
};

// Ordered samples of a simulated measurement, plus provenance.
struct ScanResult {
    std::string scenario;
    std::string x_label;
    std::vector<ScanPoint> points;
    ScanMeta meta;

    double mean_rate() const
    {
        if (points.empty())
            return 0.0;
        double s = 0.0;
        for (const auto& p : points)
            s += p.rate;
        return s / static_cast<double>(points.size());
    }
};

} // namespace twophoton

namespace twophoton {

struct RateEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

} // namespace twophoton
