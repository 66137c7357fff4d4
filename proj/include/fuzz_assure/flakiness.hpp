#pragma once

// Turning point test for the IID hypothesis on a series of repeated test
// observations (outcome codes, runtimes, coverage sizes).
//
// A turning point is an interior strict local extremum. Under IID continuous
// observations the count T over a series of length n has
//   E[T]   = 2 (n - 2) / 3
//   Var[T] = (16 n - 29) / 90
// and is asymptotically normal. Runs of equal adjacent values are collapsed
// to one value first; n is the collapsed length.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fuzz_assure/error.hpp"

namespace fuzz_assure {

/// Series shorter than this (after collapsing ties) carry a low-power flag.
inline constexpr std::size_t kTurningPointLowPowerLength = 30;

struct TurningPointResult {
    std::size_t original_length = 0;
    /// Length after collapsing runs of tied values.
    std::size_t length = 0;
    std::size_t t_count = 0;
    double expected = 0.0;
    double variance = 0.0;
    double z_score = 0.0;
    /// Two-sided normal p-value.
    double p_value = 1.0;
    double alpha = 0.05;
    bool iid_rejected = false;
    bool ties_collapsed = false;
    bool low_power = false;
};

/// Removes consecutive duplicates.
inline std::vector<double> collapse_ties(std::span<const double> values) {
    std::vector<double> out;
    out.reserve(values.size());
    for (const double v : values) {
        if (out.empty() || out.back() != v) {
            out.push_back(v);
        }
    }
    return out;
}

/// Number of strict interior local extrema; the series must be tie-free.
inline std::size_t count_turning_points(std::span<const double> v) {
    std::size_t t = 0;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        const bool peak = v[i - 1] < v[i] && v[i] > v[i + 1];
        const bool trough = v[i - 1] > v[i] && v[i] < v[i + 1];
        t += peak || trough;
    }
    return t;
}

/// P(|Z| >= |z|) for standard normal Z.
inline double two_sided_normal_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

inline TurningPointResult turning_point_test(std::span<const double> series, double alpha = 0.05) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw PreconditionViolation("alpha must lie in (0, 1)");
    }
    if (series.size() < 3) {
        throw SeriesTooShort("turning point test needs at least 3 observations, got " +
                             std::to_string(series.size()));
    }
    for (const double v : series) {
        if (std::isnan(v)) {
            throw PreconditionViolation("series contains NaN");
        }
    }
    const std::vector<double> v = collapse_ties(series);
    if (v.size() < 3) {
        throw DegenerateSeries("series has fewer than 3 distinct runs after collapsing ties (" +
                               std::to_string(v.size()) + ")");
    }

    TurningPointResult r;
    r.original_length = series.size();
    r.length = v.size();
    r.ties_collapsed = v.size() != series.size();
    r.low_power = v.size() < kTurningPointLowPowerLength;
    r.alpha = alpha;
    r.t_count = count_turning_points(v);
    const double n = static_cast<double>(v.size());
    r.expected = 2.0 * (n - 2.0) / 3.0;
    r.variance = (16.0 * n - 29.0) / 90.0;
    r.z_score = (static_cast<double>(r.t_count) - r.expected) / std::sqrt(r.variance);
    r.p_value = two_sided_normal_p(r.z_score);
    r.iid_rejected = r.p_value < alpha;
    return r;
}

} // namespace fuzz_assure
