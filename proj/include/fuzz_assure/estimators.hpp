#pragma once

// Residual-risk and species-richness estimators. All functions are pure and
// operate on the scalar campaign statistics (n, S(n), f1, f2).
//
//   Good-Turing discovery probability   U(n)       = f1 / n
//   Chao1 asymptotic richness           S          = S(n) + f1^2 / (2 f2)        (f2 > 0)
//                                                  = S(n) + f1 (f1 - 1) / 2      (f2 = 0)
//   Species extrapolation               S(n + m)   = S(n) + f0 [1 - (1 - f1 / (n f0 + f1))^m]
//   Residual-risk extrapolation         U(n + m)   = (f1 / n) (n f0 / (n f0 + f1))^(m + 1)
//   Feasible coverage                   G(n)       = S(n) / S

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fuzz_assure/error.hpp"
#include "fuzz_assure/incidence.hpp"

namespace fuzz_assure {

namespace detail {

inline void require_campaign(Count n) {
    if (n == 0) {
        throw EmptyCampaign("empty campaign: estimate undefined for n = 0");
    }
}

/// Per-step decay x = f1 / (n f0 + f1) of the extrapolation formulas.
inline double decay_rate(Count n, Count f1, double f0_hat) {
    const double f1d = static_cast<double>(f1);
    return f1d / (static_cast<double>(n) * f0_hat + f1d);
}

/// (1 - x)^k as exp(k log1p(-x)); stays accurate for tiny x and huge k.
inline double survival_power(double x, double k) {
    if (k == 0.0) {
        return 1.0;
    }
    if (x >= 1.0) {
        return 0.0;
    }
    return std::exp(k * std::log1p(-x));
}

} // namespace detail

/// Probability that the next input exhibits an unseen species, f1 / n,
/// clamped to [0, 1]. With incidence data f1 can exceed n (one input may be
/// the only witness of several species), hence the clamp.
inline double good_turing(Count n, Count f1) {
    detail::require_campaign(n);
    const double u = static_cast<double>(f1) / static_cast<double>(n);
    return u > 1.0 ? 1.0 : u;
}

struct RichnessEstimate {
    double s_hat = 0.0;
    double f0_hat = 0.0;
};

inline RichnessEstimate chao1(Count s_obs, Count f1, Count f2) {
    if (f1 > s_obs || f2 > s_obs - f1) {
        throw PreconditionViolation("chao1 requires s_obs >= f1 + f2");
    }
    const double a = static_cast<double>(f1);
    const double f0 = f2 > 0 ? a * a / (2.0 * static_cast<double>(f2)) : a * (a - 1.0) / 2.0;
    const double s_hat = static_cast<double>(s_obs) + f0;
    // Re-derived so that f0_hat == s_hat - s_obs holds exactly.
    return {s_hat, s_hat - static_cast<double>(s_obs)};
}

/// Expected number of species after `m_star` further inputs. `f0_hat` is the
/// unseen-species count: Chao1's by default, or the known truth.
inline double extrapolate_species(Count s_obs, Count n, Count f1, double f0_hat, Count m_star) {
    detail::require_campaign(n);
    if (!(f0_hat >= 0.0)) {
        throw PreconditionViolation("f0_hat must be non-negative");
    }
    const double s = static_cast<double>(s_obs);
    if (m_star == 0 || f1 == 0 || f0_hat == 0.0) {
        return s;
    }
    const double x = detail::decay_rate(n, f1, f0_hat);
    const double added = f0_hat * -std::expm1(static_cast<double>(m_star) * std::log1p(-x));
    return s + std::min(added, f0_hat);
}

/// Residual risk after `m_star` further inputs; strictly below Good-Turing
/// for any m_star >= 0 when f1 > 0 and f0_hat > 0.
inline double extrapolate_risk(Count n, Count f1, double f0_hat, Count m_star) {
    const double u = good_turing(n, f1);
    if (!(f0_hat >= 0.0)) {
        throw PreconditionViolation("f0_hat must be non-negative");
    }
    if (f1 == 0 || f0_hat == 0.0) {
        return 0.0;
    }
    const double x = detail::decay_rate(n, f1, f0_hat);
    return u * detail::survival_power(x, static_cast<double>(m_star) + 1.0);
}

/// S(n) / S. Throws EmptyCampaign when S is zero.
inline double feasible_coverage(Count s_obs, double s_hat) {
    if (s_hat == 0.0) {
        throw EmptyCampaign("feasible coverage undefined: no species observed or estimated");
    }
    if (!(s_hat >= static_cast<double>(s_obs))) {
        throw PreconditionViolation("feasible coverage requires s_hat >= s_obs");
    }
    return static_cast<double>(s_obs) / s_hat;
}

struct StopRuleResult {
    Count m_star = 0;
    /// Set when the risk threshold cannot be met within kStopRuleCap inputs.
    bool unreachable = false;
    double risk_now = 0.0;
    double risk_at_m_star = 0.0;
    /// Risk one input earlier; only meaningful when m_star >= 1.
    std::optional<double> risk_before_m_star;
};

inline constexpr Count kStopRuleCap = static_cast<Count>(std::numeric_limits<std::int64_t>::max());

/// Smallest m* >= 0 with extrapolate_risk(n, f1, f0_hat, m*) <= theta.
///
/// A closed-form estimate from logarithms seeds a bracket that is then
/// narrowed by forward evaluation, so the returned m* satisfies
/// risk(m*) <= theta < risk(m* - 1) exactly as computed by extrapolate_risk.
inline StopRuleResult stop_rule(Count n, Count f1, double f0_hat, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) {
        throw InvalidThreshold("risk threshold must lie in (0, 1)");
    }
    detail::require_campaign(n);
    auto risk = [&](Count m) { return extrapolate_risk(n, f1, f0_hat, m); };

    StopRuleResult out;
    out.risk_now = good_turing(n, f1);
    const double r0 = risk(0);
    if (r0 <= theta) {
        out.risk_at_m_star = r0;
        return out;
    }

    // r0 > theta > 0 implies f1 > 0 and f0_hat > 0.
    const double x = detail::decay_rate(n, f1, f0_hat);
    const double u = out.risk_now;
    const double estimate = std::ceil(std::log(theta / u) / std::log1p(-x)) - 1.0;

    Count guess = 1;
    if (estimate >= static_cast<double>(kStopRuleCap)) {
        guess = kStopRuleCap;
    } else if (estimate > 1.0) {
        guess = static_cast<Count>(estimate);
    }

    // Bracket (lo, hi] with risk(lo) > theta >= risk(hi).
    Count lo = 0;
    Count hi = guess;
    if (risk(hi) > theta) {
        lo = hi;
        Count step = std::max<Count>(1, hi / 1024);
        for (;;) {
            if (hi == kStopRuleCap) {
                out.m_star = kStopRuleCap;
                out.unreachable = true;
                out.risk_at_m_star = risk(kStopRuleCap);
                out.risk_before_m_star = risk(kStopRuleCap - 1);
                return out;
            }
            hi = (kStopRuleCap - hi < step) ? kStopRuleCap : hi + step;
            if (risk(hi) <= theta) {
                break;
            }
            lo = hi;
            step = step > kStopRuleCap / 2 ? kStopRuleCap : step * 2;
        }
    } else {
        Count step = std::max<Count>(1, hi / 1024);
        for (;;) {
            const Count candidate = hi > step ? hi - step : 0;
            if (candidate == 0 || risk(candidate) > theta) {
                lo = candidate;
                break;
            }
            hi = candidate;
            step *= 2;
        }
    }
    while (hi - lo > 1) {
        const Count mid = lo + (hi - lo) / 2;
        if (risk(mid) <= theta) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    out.m_star = hi;
    out.risk_at_m_star = risk(hi);
    out.risk_before_m_star = risk(hi - 1);
    return out;
}

/// Every point estimate computed from one snapshot.
struct AssuranceReport {
    Count n = 0;
    Count s_obs = 0;
    Count f1 = 0;
    Count f2 = 0;
    double u_hat = 0.0;
    double f0_hat = 0.0;
    double s_hat = 0.0;
    /// Undefined (empty) when no species has been observed.
    std::optional<double> g_hat;
};

inline AssuranceReport full_report(const SnapshotStats& stats) {
    detail::require_campaign(stats.n);
    AssuranceReport r;
    r.n = stats.n;
    r.s_obs = stats.s_obs;
    r.f1 = stats.f1;
    r.f2 = stats.f2;
    r.u_hat = good_turing(stats.n, stats.f1);
    const RichnessEstimate rich = chao1(stats.s_obs, stats.f1, stats.f2);
    r.s_hat = rich.s_hat;
    r.f0_hat = rich.f0_hat;
    if (r.s_hat > 0.0) {
        r.g_hat = feasible_coverage(stats.s_obs, r.s_hat);
    }
    return r;
}

inline AssuranceReport full_report(const CampaignSnapshot& snapshot) { return full_report(snapshot.stats()); }

struct CurvePoint {
    Count m_star = 0;
    double s_pred = 0.0;
    double u_pred = 0.0;
};

struct ExtrapolationCurve {
    AssuranceReport base;
    /// The unseen-species count the curve was computed with.
    double f0_used = 0.0;
    std::vector<CurvePoint> points;
};

/// Integer horizons round(k * horizon / steps) for k = 1..steps, deduplicated.
inline std::vector<Count> curve_grid(Count horizon, Count steps) {
    if (horizon < 1 || steps < 1) {
        throw PreconditionViolation("extrapolation curve needs horizon >= 1 and steps >= 1");
    }
    std::vector<Count> grid;
    grid.reserve(static_cast<std::size_t>(std::min(steps, horizon)));
    const auto h = static_cast<unsigned __int128>(horizon);
    for (Count k = 1; k <= steps; ++k) {
        // Exact integer rounding of k * horizon / steps.
        const auto num = h * k;
        const auto m = static_cast<Count>((num + steps / 2) / steps);
        if (m >= 1 && (grid.empty() || m > grid.back())) {
            grid.push_back(m);
        }
    }
    return grid;
}

/// Species and risk extrapolation over `steps` evenly spaced horizons in
/// (0, horizon]. `f0_override` replaces the Chao1 unseen count.
inline ExtrapolationCurve extrapolation_curve(const SnapshotStats& stats, Count horizon, Count steps,
                                              std::optional<double> f0_override = std::nullopt) {
    ExtrapolationCurve curve;
    curve.base = full_report(stats);
    curve.f0_used = f0_override.value_or(curve.base.f0_hat);
    for (const Count m : curve_grid(horizon, steps)) {
        curve.points.push_back({m, extrapolate_species(stats.s_obs, stats.n, stats.f1, curve.f0_used, m),
                                extrapolate_risk(stats.n, stats.f1, curve.f0_used, m)});
    }
    return curve;
}

inline ExtrapolationCurve extrapolation_curve(const CampaignSnapshot& snapshot, Count horizon, Count steps,
                                              std::optional<double> f0_override = std::nullopt) {
    return extrapolation_curve(snapshot.stats(), horizon, steps, f0_override);
}

/// Large-sample standard error of U_hat - U (Esty 1983):
/// sqrt(f1 + 2 f2 - f1^2 / n) / n, floored at zero.
inline double good_turing_standard_error(Count n, Count f1, Count f2) {
    detail::require_campaign(n);
    const double nd = static_cast<double>(n);
    const double a = static_cast<double>(f1);
    const double v = a + 2.0 * static_cast<double>(f2) - a * a / nd;
    return v > 0.0 ? std::sqrt(v) / nd : 0.0;
}

} // namespace fuzz_assure
