#pragma once

// Input-level bootstrap intervals for the campaign estimators.
//
// Each resample draws n test inputs with replacement from the observed
// record sequence, re-accumulates the incidence counts and re-estimates.
// The plain percentile interval of the re-estimates is available, but it is
// badly biased for Good-Turing: duplicated inputs turn singletons into
// doubletons, so resampled f1 collapses (to about half of f1 for a uniform
// campaign at n = S) and the interval misses the truth almost always.
//
// The default therefore bootstraps the estimation *error*. In the resample
// world the population is the observed record sequence, so every target is
// known exactly:
//   U*      share of the original inputs that exhibit a species absent from
//           the resample
//   S*      number of species observed in the original campaign
// The error quantiles are reflected around the point estimate ("basic"
// interval). For Good-Turing the error is studentized by its large-sample
// standard error (percentile-t), which corrects the under-dispersion of the
// resample world.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fuzz_assure/detail/parallel.hpp"
#include "fuzz_assure/error.hpp"
#include "fuzz_assure/estimators.hpp"
#include "fuzz_assure/incidence.hpp"
#include "fuzz_assure/random.hpp"

namespace fuzz_assure {

enum class BootstrapEstimator { u_hat, s_hat, f0_hat, g_hat };

enum class BootstrapMethod {
    automatic,   ///< studentized for u_hat, basic for the rest
    percentile,  ///< quantiles of the re-estimates
    basic,       ///< reflected quantiles of (re-estimate - resample-world truth)
    studentized, ///< percentile-t on the Good-Turing error; u_hat only
};

inline std::string_view to_string(BootstrapEstimator e) {
    switch (e) {
    case BootstrapEstimator::u_hat: return "u_hat";
    case BootstrapEstimator::s_hat: return "s_hat";
    case BootstrapEstimator::f0_hat: return "f0_hat";
    case BootstrapEstimator::g_hat: return "g_hat";
    }
    return "?";
}

inline std::string_view to_string(BootstrapMethod m) {
    switch (m) {
    case BootstrapMethod::automatic: return "automatic";
    case BootstrapMethod::percentile: return "percentile";
    case BootstrapMethod::basic: return "basic";
    case BootstrapMethod::studentized: return "studentized";
    }
    return "?";
}

inline std::optional<BootstrapEstimator> parse_bootstrap_estimator(std::string_view s) {
    for (auto e : {BootstrapEstimator::u_hat, BootstrapEstimator::s_hat, BootstrapEstimator::f0_hat,
                   BootstrapEstimator::g_hat}) {
        if (to_string(e) == s) {
            return e;
        }
    }
    return std::nullopt;
}

inline std::optional<BootstrapMethod> parse_bootstrap_method(std::string_view s) {
    for (auto m : {BootstrapMethod::automatic, BootstrapMethod::percentile, BootstrapMethod::basic,
                   BootstrapMethod::studentized}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    return std::nullopt;
}

struct BootstrapOptions {
    std::size_t reps = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;
    BootstrapMethod method = BootstrapMethod::automatic;
    unsigned workers = detail::default_workers();
};

struct BootstrapInterval {
    double lower = 0.0;
    double upper = 0.0;
    double point = 0.0;
    BootstrapEstimator estimator = BootstrapEstimator::u_hat;
    /// The method actually applied (never `automatic`).
    BootstrapMethod method = BootstrapMethod::percentile;
    std::size_t reps = 0;
    /// Resamples on which the estimator (or its pivot) was undefined.
    std::size_t skipped = 0;
};

/// Records with species interned to dense indices; the resampling fast path.
struct DenseCampaign {
    std::vector<std::vector<std::uint32_t>> inputs;
    std::uint32_t species_count = 0;

    template <std::ranges::input_range Records>
    static DenseCampaign from_records(const Records& records) {
        DenseCampaign dense;
        std::map<SpeciesId, std::uint32_t> index;
        for (const IncidenceRecord& r : records) {
            auto& row = dense.inputs.emplace_back();
            row.reserve(r.species.size());
            for (const auto& sp : r.species) {
                auto [it, inserted] = index.try_emplace(sp, dense.species_count);
                if (inserted) {
                    ++dense.species_count;
                }
                row.push_back(it->second);
            }
        }
        return dense;
    }

    SnapshotStats stats() const {
        std::vector<Count> counts(species_count, 0);
        for (const auto& row : inputs) {
            for (auto sp : row) {
                ++counts[sp];
            }
        }
        return stats_from_counts(counts, inputs.size());
    }

    static SnapshotStats stats_from_counts(const std::vector<Count>& counts, Count n) {
        SnapshotStats s;
        s.n = n;
        for (const Count c : counts) {
            s.s_obs += c > 0;
            s.f1 += c == 1;
            s.f2 += c == 2;
        }
        return s;
    }
};

namespace detail {

/// Linear-interpolation sample quantile (Hyndman-Fan type 7) of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::optional<double> estimate(BootstrapEstimator e, const SnapshotStats& s) {
    switch (e) {
    case BootstrapEstimator::u_hat: return good_turing(s.n, s.f1);
    case BootstrapEstimator::s_hat: return chao1(s.s_obs, s.f1, s.f2).s_hat;
    case BootstrapEstimator::f0_hat: return chao1(s.s_obs, s.f1, s.f2).f0_hat;
    case BootstrapEstimator::g_hat: {
        const double s_hat = chao1(s.s_obs, s.f1, s.f2).s_hat;
        if (s_hat == 0.0) {
            return std::nullopt;
        }
        return feasible_coverage(s.s_obs, s_hat);
    }
    }
    return std::nullopt;
}

inline std::pair<double, double> natural_range(BootstrapEstimator e, const SnapshotStats& s) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (e) {
    case BootstrapEstimator::u_hat:
    case BootstrapEstimator::g_hat: return {0.0, 1.0};
    case BootstrapEstimator::s_hat: return {static_cast<double>(s.s_obs), inf};
    case BootstrapEstimator::f0_hat: return {0.0, inf};
    }
    return {-inf, inf};
}

} // namespace detail

/// Bootstrap interval for `estimator` over a dense campaign. Deterministic
/// for a fixed seed regardless of the worker count.
inline BootstrapInterval bootstrap_ci(const DenseCampaign& campaign, BootstrapEstimator estimator,
                                      const BootstrapOptions& options) {
    if (campaign.inputs.empty()) {
        throw EmptyCampaign("bootstrap needs at least one test input");
    }
    if (options.reps < 100) {
        throw PreconditionViolation("bootstrap needs at least 100 resamples");
    }
    if (!(options.level > 0.0 && options.level < 1.0)) {
        throw PreconditionViolation("confidence level must lie in (0, 1)");
    }
    BootstrapMethod method = options.method;
    if (method == BootstrapMethod::automatic) {
        method = estimator == BootstrapEstimator::u_hat ? BootstrapMethod::studentized : BootstrapMethod::basic;
    }
    if (method == BootstrapMethod::studentized && estimator != BootstrapEstimator::u_hat) {
        throw PreconditionViolation("studentized bootstrap is only defined for u_hat");
    }

    const Count n = campaign.inputs.size();
    const SnapshotStats original = campaign.stats();
    const auto point = detail::estimate(estimator, original);
    if (!point) {
        throw EmptyCampaign("estimator undefined on the observed campaign");
    }
    const double se_original = good_turing_standard_error(n, original.f1, original.f2);

    // NaN marks a skipped resample.
    std::vector<double> values(options.reps, std::numeric_limits<double>::quiet_NaN());
    const std::vector<Rng> streams = split_streams(options.seed, options.reps);

    detail::parallel_for(
        options.reps,
        [&](std::size_t b) {
            Rng rng = streams[b];
            std::vector<Count> counts(campaign.species_count, 0);
            for (Count i = 0; i < n; ++i) {
                for (auto sp : campaign.inputs[rng.below(n)]) {
                    ++counts[sp];
                }
            }
            const SnapshotStats s = DenseCampaign::stats_from_counts(counts, n);
            const auto est = detail::estimate(estimator, s);
            if (!est) {
                return;
            }
            if (method == BootstrapMethod::percentile) {
                values[b] = *est;
                return;
            }

            double truth = 0.0;
            switch (estimator) {
            case BootstrapEstimator::u_hat: {
                Count missing = 0;
                for (const auto& row : campaign.inputs) {
                    missing += std::any_of(row.begin(), row.end(), [&](auto sp) { return counts[sp] == 0; });
                }
                truth = static_cast<double>(missing) / static_cast<double>(n);
                break;
            }
            case BootstrapEstimator::s_hat: truth = static_cast<double>(original.s_obs); break;
            case BootstrapEstimator::f0_hat:
                truth = static_cast<double>(original.s_obs) - static_cast<double>(s.s_obs);
                break;
            case BootstrapEstimator::g_hat:
                if (original.s_obs == 0) {
                    return;
                }
                truth = static_cast<double>(s.s_obs) / static_cast<double>(original.s_obs);
                break;
            }
            const double err = *est - truth;
            if (method == BootstrapMethod::basic) {
                values[b] = err;
                return;
            }
            const double se = good_turing_standard_error(n, s.f1, s.f2);
            if (se > 0.0) {
                values[b] = err / se;
            } else if (err == 0.0) {
                values[b] = 0.0;
            }
        },
        options.workers);

    std::vector<double> valid;
    valid.reserve(values.size());
    for (double v : values) {
        if (!std::isnan(v)) {
            valid.push_back(v);
        }
    }
    BootstrapInterval out;
    out.point = *point;
    out.estimator = estimator;
    out.method = method;
    out.reps = options.reps;
    out.skipped = options.reps - valid.size();
    if (valid.empty()) {
        throw BootstrapError("estimator undefined on every resample");
    }
    std::sort(valid.begin(), valid.end());
    const double alpha = 1.0 - options.level;
    const double q_lo = detail::quantile_sorted(valid, alpha / 2.0);
    const double q_hi = detail::quantile_sorted(valid, 1.0 - alpha / 2.0);

    switch (method) {
    case BootstrapMethod::percentile:
        out.lower = q_lo;
        out.upper = q_hi;
        break;
    case BootstrapMethod::basic:
        out.lower = *point - q_hi;
        out.upper = *point - q_lo;
        break;
    case BootstrapMethod::studentized:
        out.lower = *point - q_hi * se_original;
        out.upper = *point - q_lo * se_original;
        break;
    case BootstrapMethod::automatic: break;
    }
    const auto [lo_bound, hi_bound] = detail::natural_range(estimator, original);
    out.lower = std::clamp(out.lower, lo_bound, hi_bound);
    out.upper = std::clamp(out.upper, lo_bound, hi_bound);
    return out;
}

template <std::ranges::input_range Records>
BootstrapInterval bootstrap_ci(const Records& records, BootstrapEstimator estimator,
                               const BootstrapOptions& options) {
    return bootstrap_ci(DenseCampaign::from_records(records), estimator, options);
}

} // namespace fuzz_assure
