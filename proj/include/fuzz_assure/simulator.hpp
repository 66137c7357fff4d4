#pragma once

// Synthetic campaigns drawn from a known species-probability model, with the
// exact ground truth (S, U(n)) needed to score the estimators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "fuzz_assure/bootstrap.hpp"
#include "fuzz_assure/detail/parallel.hpp"
#include "fuzz_assure/error.hpp"
#include "fuzz_assure/estimators.hpp"
#include "fuzz_assure/incidence.hpp"
#include "fuzz_assure/random.hpp"

namespace fuzz_assure {

namespace dist {

struct Uniform {
    friend bool operator==(const Uniform&, const Uniform&) = default;
};

/// p_i proportional to i^-alpha.
struct Zipf {
    double alpha = 1.0;
    friend bool operator==(const Zipf&, const Zipf&) = default;
};

/// p_i proportional to q^i.
struct Geometric {
    double q = 0.5;
    friend bool operator==(const Geometric&, const Geometric&) = default;
};

/// `core_mass` spread uniformly over S - island_count core species and the
/// remainder uniformly over `island_count` rare island species. Models
/// behaviour gated behind narrow input regions (magic numbers).
struct Endemic {
    double core_mass = 0.9;
    std::uint64_t island_count = 1;
    friend bool operator==(const Endemic&, const Endemic&) = default;
};

} // namespace dist

using Distribution = std::variant<dist::Uniform, dist::Zipf, dist::Geometric, dist::Endemic>;

enum class SamplingMode {
    abundance, ///< each input exhibits exactly one species
    incidence, ///< each species appears independently per input
};

inline std::string_view to_string(SamplingMode m) {
    return m == SamplingMode::abundance ? "abundance" : "incidence";
}

inline std::string describe(const Distribution& d) {
    struct {
        std::string operator()(const dist::Uniform&) const { return "uniform"; }
        std::string operator()(const dist::Zipf& z) const { return "zipf(" + std::to_string(z.alpha) + ")"; }
        std::string operator()(const dist::Geometric& g) const { return "geometric(" + std::to_string(g.q) + ")"; }
        std::string operator()(const dist::Endemic& e) const {
            return "endemic(" + std::to_string(e.core_mass) + "," + std::to_string(e.island_count) + ")";
        }
    } visitor;
    return std::visit(visitor, d);
}

struct GroundTruthModel {
    std::uint64_t s_true = 0;
    /// Abundance mode: a probability simplex. Incidence mode: per-species
    /// per-input detection probabilities.
    std::vector<double> probabilities;
    SamplingMode mode = SamplingMode::abundance;
    Distribution distribution;

    /// Species that can actually be observed (p > 0).
    std::uint64_t reachable_species() const {
        return static_cast<std::uint64_t>(
            std::count_if(probabilities.begin(), probabilities.end(), [](double p) { return p > 0.0; }));
    }
};

/// Builds a normalized model. In incidence mode the shape is scaled so that
/// an input exhibits `incidence_mass` species on average (each probability
/// capped at 1).
inline GroundTruthModel build_model(std::uint64_t s_true, const Distribution& distribution,
                                    SamplingMode mode = SamplingMode::abundance, double incidence_mass = 1.0) {
    if (s_true < 1) {
        throw ModelError("model needs at least one species");
    }
    if (s_true > (std::uint64_t{1} << 31)) {
        throw ModelError("species count too large");
    }
    if (mode == SamplingMode::incidence && !(incidence_mass > 0.0 && std::isfinite(incidence_mass))) {
        throw ModelError("incidence mass must be positive");
    }
    std::vector<long double> w(s_true);
    struct Weights {
        std::vector<long double>& w;
        void operator()(const dist::Uniform&) const { std::fill(w.begin(), w.end(), 1.0L); }
        void operator()(const dist::Zipf& z) const {
            if (!(z.alpha > 0.0 && std::isfinite(z.alpha))) {
                throw ModelError("zipf alpha must be > 0");
            }
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] = std::pow(static_cast<long double>(i + 1), -static_cast<long double>(z.alpha));
            }
        }
        void operator()(const dist::Geometric& g) const {
            if (!(g.q > 0.0 && g.q < 1.0)) {
                throw ModelError("geometric q must lie in (0, 1)");
            }
            // q^i / q keeps the first weight at 1; normalization cancels it.
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] = std::pow(static_cast<long double>(g.q), static_cast<long double>(i));
            }
        }
        void operator()(const dist::Endemic& e) const {
            if (!(e.core_mass > 0.0 && e.core_mass < 1.0)) {
                throw ModelError("endemic core_mass must lie in (0, 1)");
            }
            if (e.island_count < 1 || e.island_count >= w.size()) {
                throw ModelError("endemic island_count must lie in [1, S - 1]");
            }
            const std::size_t core = w.size() - e.island_count;
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] = i < core ? e.core_mass / static_cast<long double>(core)
                                : (1.0L - e.core_mass) / static_cast<long double>(e.island_count);
            }
        }
    };
    std::visit(Weights{w}, distribution);

    const long double total = std::accumulate(w.begin(), w.end(), 0.0L);
    GroundTruthModel model;
    model.s_true = s_true;
    model.mode = mode;
    model.distribution = distribution;
    model.probabilities.resize(s_true);
    const long double scale = mode == SamplingMode::incidence ? static_cast<long double>(incidence_mass) : 1.0L;
    for (std::size_t i = 0; i < w.size(); ++i) {
        model.probabilities[i] = static_cast<double>(std::min(1.0L, scale * w[i] / total));
    }
    return model;
}

/// Model from an explicit probability vector (a known S, measured mutant
/// kill rates, ...).
inline GroundTruthModel model_from_probabilities(std::vector<double> probabilities, SamplingMode mode) {
    if (probabilities.empty()) {
        throw ModelError("model needs at least one species");
    }
    long double total = 0.0L;
    for (double p : probabilities) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ModelError("probabilities must lie in [0, 1]");
        }
        total += p;
    }
    if (mode == SamplingMode::abundance && std::fabs(static_cast<double>(total - 1.0L)) > 1e-12) {
        throw ModelError("abundance probabilities must sum to 1");
    }
    GroundTruthModel m;
    m.s_true = probabilities.size();
    m.probabilities = std::move(probabilities);
    m.mode = mode;
    m.distribution = dist::Uniform{};
    return m;
}

inline std::string species_name(std::uint32_t index) { return "sp:" + std::to_string(index + 1); }
inline std::string input_name(std::uint64_t index) { return "t" + std::to_string(index + 1); }

/// Draws test inputs one at a time as dense species indices.
class CampaignSampler {
public:
    CampaignSampler(const GroundTruthModel& model, Rng rng) : model_(&model), rng_(rng) {
        if (model.mode == SamplingMode::abundance) {
            cdf_.resize(model.probabilities.size());
            double acc = 0.0;
            for (std::size_t i = 0; i < cdf_.size(); ++i) {
                acc += model.probabilities[i];
                cdf_[i] = acc;
            }
        }
    }

    /// Replaces `out` with the species of the next input (ascending order).
    void next(std::vector<std::uint32_t>& out) {
        out.clear();
        if (model_->mode == SamplingMode::abundance) {
            const double x = rng_.uniform() * cdf_.back();
            auto it = std::upper_bound(cdf_.begin(), cdf_.end(), x);
            auto idx = static_cast<std::size_t>(it - cdf_.begin());
            if (idx >= cdf_.size()) {
                idx = cdf_.size() - 1;
                while (model_->probabilities[idx] == 0.0) {
                    --idx;
                }
            }
            out.push_back(static_cast<std::uint32_t>(idx));
            return;
        }
        const auto& p = model_->probabilities;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (rng_.chance(p[i])) {
                out.push_back(static_cast<std::uint32_t>(i));
            }
        }
    }

private:
    const GroundTruthModel* model_;
    Rng rng_;
    std::vector<double> cdf_;
};

/// Exact probability that the next input exhibits a species not marked in
/// `observed`. Sums in species order.
inline double true_discovery_probability(const GroundTruthModel& model, const std::vector<bool>& observed) {
    const auto& p = model.probabilities;
    if (model.mode == SamplingMode::abundance) {
        double u = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (!observed[i]) {
                u += p[i];
            }
        }
        return u;
    }
    double none = 1.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!observed[i]) {
            none *= 1.0 - p[i];
        }
    }
    return 1.0 - none;
}

struct TruthPoint {
    Count n = 0;
    Count s_observed = 0;
    double u_true = 0.0;

    friend bool operator==(const TruthPoint&, const TruthPoint&) = default;
};

struct SimulatedCampaign {
    GroundTruthModel model;
    std::uint64_t seed = 0;
    std::vector<IncidenceRecord> records;
    std::vector<TruthPoint> truth_trace;
};

/// `count` logarithmically spaced checkpoints in [1, n], always ending at n.
inline std::vector<Count> log_checkpoints(Count n, std::size_t count = 20) {
    std::vector<Count> out;
    if (n == 0 || count == 0) {
        return out;
    }
    const double top = std::log(static_cast<double>(n));
    for (std::size_t k = 0; k < count; ++k) {
        const double frac = count == 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(count - 1);
        auto c = static_cast<Count>(std::llround(std::exp(top * frac)));
        c = std::clamp<Count>(c, 1, n);
        if (out.empty() || c > out.back()) {
            out.push_back(c);
        }
    }
    if (out.back() != n) {
        out.push_back(n);
    }
    return out;
}

/// Samples `n` inputs. Stream is the generator state to draw from; the seed
/// overload uses `Rng(seed)`.
inline SimulatedCampaign simulate(const GroundTruthModel& model, Count n, Rng stream, std::uint64_t seed,
                                  std::optional<std::vector<Count>> checkpoints = std::nullopt) {
    if (n < 1) {
        throw PreconditionViolation("simulation needs n >= 1");
    }
    std::vector<Count> marks = checkpoints.value_or(log_checkpoints(n));
    std::sort(marks.begin(), marks.end());
    marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

    SimulatedCampaign out;
    out.model = model;
    out.seed = seed;
    out.records.reserve(n);

    CampaignSampler sampler(model, stream);
    std::vector<bool> observed(model.probabilities.size(), false);
    Count s_observed = 0;
    std::vector<std::uint32_t> draw;
    auto mark = marks.begin();
    while (mark != marks.end() && *mark == 0) {
        out.truth_trace.push_back({0, 0, true_discovery_probability(model, observed)});
        ++mark;
    }
    for (Count i = 0; i < n; ++i) {
        sampler.next(draw);
        IncidenceRecord record{input_name(i), {}, i};
        for (auto sp : draw) {
            record.species.emplace(species_name(sp));
            if (!observed[sp]) {
                observed[sp] = true;
                ++s_observed;
            }
        }
        out.records.push_back(std::move(record));
        while (mark != marks.end() && *mark == i + 1) {
            out.truth_trace.push_back({i + 1, s_observed, true_discovery_probability(model, observed)});
            ++mark;
        }
    }
    return out;
}

inline SimulatedCampaign simulate(const GroundTruthModel& model, Count n, std::uint64_t seed,
                                  std::optional<std::vector<Count>> checkpoints = std::nullopt) {
    return simulate(model, n, Rng(seed), seed, std::move(checkpoints));
}

/// From-scratch truth over the first `n` records of a simulated campaign.
inline TruthPoint recompute_truth(const GroundTruthModel& model, const std::vector<IncidenceRecord>& records,
                                  Count n) {
    std::vector<bool> observed(model.probabilities.size(), false);
    Count s = 0;
    for (Count i = 0; i < n && i < records.size(); ++i) {
        for (const auto& sp : records[i].species) {
            const auto idx = std::stoul(sp.str().substr(3)) - 1;
            if (!observed[idx]) {
                observed[idx] = true;
                ++s;
            }
        }
    }
    return {n, s, true_discovery_probability(model, observed)};
}

// ---------------------------------------------------------------------------
// Estimator evaluation against ground truth.

/// Scores for one estimator at one checkpoint, aggregated over replicates.
struct EvaluationRow {
    std::string estimator;
    Count checkpoint = 0;
    std::size_t reps = 0;
    double mean_truth = 0.0;
    double mean_estimate = 0.0;
    double mean_error = 0.0;
    double mean_abs_error = 0.0;
    double rmse = 0.0;
    /// Mean |error| / truth over replicates with non-zero truth.
    double mean_abs_rel_error = 0.0;
    /// Share of replicates whose bootstrap interval covered the truth. Only
    /// computed for u_hat at the final checkpoint when requested.
    std::optional<double> ci_coverage;
};

struct EvaluationTable {
    std::vector<EvaluationRow> rows;

    const EvaluationRow* find(std::string_view estimator, Count checkpoint) const {
        for (const auto& r : rows) {
            if (r.estimator == estimator && r.checkpoint == checkpoint) {
                return &r;
            }
        }
        return nullptr;
    }
};

struct EvaluationOptions {
    /// Defaults to 20 log-spaced checkpoints in [1, n].
    std::optional<std::vector<Count>> checkpoints;
    /// Bootstrap resamples per replicate for CI coverage; 0 disables.
    std::size_t bootstrap_reps = 0;
    double level = 0.95;
    unsigned workers = detail::default_workers();
};

/// Estimators scored by evaluate_estimators, in row order. The *_true_f0
/// variants receive the true unseen-species count instead of Chao1's.
inline const std::vector<std::string>& evaluated_estimators() {
    static const std::vector<std::string> names = {
        "u_hat", "s_hat", "f0_hat", "g_hat", "s_extrap", "s_extrap_true_f0", "u_extrap", "u_extrap_true_f0",
    };
    return names;
}

/// One replicate: (estimate, truth) per estimator per checkpoint. Estimates
/// are NaN where undefined. Extrapolations are scored at horizon m* = c
/// against the same replicate continued to 2c.
struct ReplicateScores {
    // [estimator][checkpoint] -> (estimate, truth)
    std::vector<std::vector<std::pair<double, double>>> values;
    std::optional<bool> ci_covered;
};

inline ReplicateScores score_replicate(const GroundTruthModel& model, const std::vector<Count>& checkpoints,
                                       Rng stream, const EvaluationOptions& options, std::uint64_t bootstrap_seed) {
    const auto& names = evaluated_estimators();
    const Count n = checkpoints.back();
    const double s_reach = static_cast<double>(model.reachable_species());

    std::set<Count> doubled;
    for (Count c : checkpoints) {
        doubled.insert(2 * c);
    }
    std::map<Count, SnapshotStats> at_checkpoint;
    std::map<Count, double> u_at;
    std::map<Count, Count> s_at;

    CampaignSampler sampler(model, stream);
    std::vector<Count> counts(model.probabilities.size(), 0);
    std::vector<bool> observed(model.probabilities.size(), false);
    Count s_obs = 0;
    Count f1 = 0;
    Count f2 = 0;
    std::vector<std::uint32_t> draw;
    DenseCampaign dense;
    dense.species_count = static_cast<std::uint32_t>(model.probabilities.size());
    const bool want_ci = options.bootstrap_reps > 0;

    auto cp = checkpoints.begin();
    for (Count i = 1; i <= 2 * n; ++i) {
        sampler.next(draw);
        for (auto sp : draw) {
            const Count c = ++counts[sp];
            if (c == 1) {
                observed[sp] = true;
                ++s_obs;
                ++f1;
            } else if (c == 2) {
                --f1;
                ++f2;
            } else if (c == 3) {
                --f2;
            }
        }
        if (want_ci && i <= n) {
            dense.inputs.push_back(draw);
        }
        if (cp != checkpoints.end() && *cp == i) {
            at_checkpoint[i] = {i, s_obs, f1, f2};
            u_at[i] = true_discovery_probability(model, observed);
            s_at[i] = s_obs;
            ++cp;
        }
        if (doubled.contains(i)) {
            u_at[i] = true_discovery_probability(model, observed);
            s_at[i] = s_obs;
        }
    }

    ReplicateScores out;
    out.values.assign(names.size(), {});
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (Count c : checkpoints) {
        const SnapshotStats& st = at_checkpoint.at(c);
        const AssuranceReport rep = full_report(st);
        const double true_f0 = s_reach - static_cast<double>(st.s_obs);
        const double s2 = static_cast<double>(s_at.at(2 * c));
        const double u2 = u_at.at(2 * c);
        const std::pair<double, double> row[] = {
            {rep.u_hat, u_at.at(c)},
            {rep.s_hat, s_reach},
            {rep.f0_hat, true_f0},
            {rep.g_hat.value_or(nan), static_cast<double>(st.s_obs) / s_reach},
            {extrapolate_species(st.s_obs, c, st.f1, rep.f0_hat, c), s2},
            {extrapolate_species(st.s_obs, c, st.f1, true_f0, c), s2},
            {extrapolate_risk(c, st.f1, rep.f0_hat, c), u2},
            {extrapolate_risk(c, st.f1, true_f0, c), u2},
        };
        for (std::size_t e = 0; e < names.size(); ++e) {
            out.values[e].push_back(row[e]);
        }
    }

    if (want_ci) {
        BootstrapOptions bo;
        bo.reps = options.bootstrap_reps;
        bo.level = options.level;
        bo.seed = bootstrap_seed;
        bo.workers = 1;
        try {
            const auto ci = bootstrap_ci(dense, BootstrapEstimator::u_hat, bo);
            const double truth = u_at.at(n);
            out.ci_covered = ci.lower <= truth && truth <= ci.upper;
        } catch (const BootstrapError&) {
            out.ci_covered = false;
        }
    }
    return out;
}

/// Aggregates replicate scores into an evaluation table.
inline EvaluationTable aggregate_scores(const std::vector<ReplicateScores>& reps,
                                        const std::vector<Count>& checkpoints) {
    EvaluationTable table;
    const auto& names = evaluated_estimators();
    for (std::size_t e = 0; e < names.size(); ++e) {
        for (std::size_t k = 0; k < checkpoints.size(); ++k) {
            EvaluationRow row;
            row.estimator = names[e];
            row.checkpoint = checkpoints[k];
            double sq = 0.0;
            std::size_t rel_count = 0;
            for (const auto& r : reps) {
                const auto [est, truth] = r.values[e][k];
                if (std::isnan(est)) {
                    continue;
                }
                const double err = est - truth;
                ++row.reps;
                row.mean_truth += truth;
                row.mean_estimate += est;
                row.mean_error += err;
                row.mean_abs_error += std::fabs(err);
                sq += err * err;
                if (truth != 0.0) {
                    row.mean_abs_rel_error += std::fabs(err) / std::fabs(truth);
                    ++rel_count;
                }
            }
            if (row.reps > 0) {
                const double m = static_cast<double>(row.reps);
                row.mean_truth /= m;
                row.mean_estimate /= m;
                row.mean_error /= m;
                row.mean_abs_error /= m;
                row.rmse = std::sqrt(sq / m);
            }
            if (rel_count > 0) {
                row.mean_abs_rel_error /= static_cast<double>(rel_count);
            }
            if (names[e] == "u_hat" && k + 1 == checkpoints.size() && !reps.empty() && reps.front().ci_covered) {
                std::size_t covered = 0;
                for (const auto& r : reps) {
                    covered += r.ci_covered.value_or(false);
                }
                row.ci_coverage = static_cast<double>(covered) / static_cast<double>(reps.size());
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

/// Runs `reps` independent replicates of `n` inputs (continued to 2n for the
/// extrapolation targets) and scores every estimator against the truth.
/// Replicate r draws from stream r of split_streams(seed, reps).
inline EvaluationTable evaluate_estimators(const GroundTruthModel& model, Count n, std::size_t reps,
                                           std::uint64_t seed, const EvaluationOptions& options = {}) {
    if (reps < 1) {
        throw PreconditionViolation("evaluation needs reps >= 1");
    }
    if (n < 1) {
        throw PreconditionViolation("evaluation needs n >= 1");
    }
    std::vector<Count> checkpoints = options.checkpoints.value_or(log_checkpoints(n));
    checkpoints.push_back(n);
    std::sort(checkpoints.begin(), checkpoints.end());
    checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
    if (checkpoints.empty() || checkpoints.front() == 0 || checkpoints.back() > n) {
        throw PreconditionViolation("checkpoints must lie in [1, n]");
    }
    // The bootstrap in replicate r is seeded from the r-th output of a
    // SplitMix64 sequence so it stays independent of the sampling streams.
    const std::vector<Rng> streams = split_streams(seed, reps);
    std::vector<std::uint64_t> boot_seeds(reps);
    SplitMix64 sm(seed ^ 0x6a09e667f3bcc909ULL);
    for (auto& s : boot_seeds) {
        s = sm.next();
    }
    std::vector<ReplicateScores> scores(reps);
    detail::parallel_for(
        reps, [&](std::size_t r) { scores[r] = score_replicate(model, checkpoints, streams[r], options, boot_seeds[r]); },
        options.workers);
    return aggregate_scores(scores, checkpoints);
}

} // namespace fuzz_assure
