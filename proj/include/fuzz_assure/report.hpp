#pragma once

// JSON and CSV renderings of the library's result types. Reports are wrapped
// in an envelope that always carries the assumption caveats.

#include <charconv>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fuzz_assure/bootstrap.hpp"
#include "fuzz_assure/estimators.hpp"
#include "fuzz_assure/flakiness.hpp"
#include "fuzz_assure/ingest.hpp"
#include "fuzz_assure/simulator.hpp"

namespace fuzz_assure {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolName = "fuzz-assure";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kReportSchema = "fuzz-assure/report/v1";

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline Json to_json(const AssuranceReport& r) {
    Json j;
    j["n"] = r.n;
    j["s_obs"] = r.s_obs;
    j["f1"] = r.f1;
    j["f2"] = r.f2;
    j["u_hat"] = r.u_hat;
    j["f0_hat"] = r.f0_hat;
    j["s_hat"] = r.s_hat;
    j["g_hat"] = r.g_hat ? Json(*r.g_hat) : Json(nullptr);
    return j;
}

inline Json to_json(const BootstrapInterval& ci, double level) {
    Json j;
    j["estimator"] = std::string(to_string(ci.estimator));
    j["method"] = std::string(to_string(ci.method));
    j["level"] = level;
    j["point"] = ci.point;
    j["lower"] = ci.lower;
    j["upper"] = ci.upper;
    j["reps"] = ci.reps;
    j["skipped"] = ci.skipped;
    return j;
}

inline Json to_json(const StopRuleResult& s, double theta, double f0_used) {
    Json j;
    j["theta"] = theta;
    j["f0_used"] = f0_used;
    j["u_hat"] = s.risk_now;
    j["m_star"] = s.m_star;
    j["unreachable"] = s.unreachable;
    j["u_at_m_star"] = s.risk_at_m_star;
    j["u_before_m_star"] = s.risk_before_m_star ? Json(*s.risk_before_m_star) : Json(nullptr);
    return j;
}

inline Json to_json(const TurningPointResult& r) {
    Json j;
    j["status"] = "ok";
    j["original_length"] = r.original_length;
    j["length"] = r.length;
    j["t_count"] = r.t_count;
    j["expected"] = r.expected;
    j["variance"] = r.variance;
    j["z_score"] = r.z_score;
    j["p_value"] = r.p_value;
    j["alpha"] = r.alpha;
    j["iid_rejected"] = r.iid_rejected;
    Json warnings = Json::array();
    if (r.ties_collapsed) {
        warnings.push_back("ties_collapsed");
    }
    if (r.low_power) {
        warnings.push_back("low_power");
    }
    j["warnings"] = warnings;
    return j;
}

inline Json to_json(const ParseStats& s) {
    Json j;
    j["records"] = s.records;
    j["skipped"] = s.skipped;
    j["duplicate_pairs"] = s.duplicate_pairs;
    return j;
}

inline Json to_json(const Distribution& d) {
    struct {
        Json operator()(const dist::Uniform&) const { return {{"kind", "uniform"}}; }
        Json operator()(const dist::Zipf& z) const { return {{"kind", "zipf"}, {"alpha", z.alpha}}; }
        Json operator()(const dist::Geometric& g) const { return {{"kind", "geometric"}, {"q", g.q}}; }
        Json operator()(const dist::Endemic& e) const {
            return {{"kind", "endemic"}, {"core_mass", e.core_mass}, {"island_count", e.island_count}};
        }
    } visitor;
    return std::visit(visitor, d);
}

/// Truth sidecar written next to a simulated campaign.
inline Json truth_sidecar(const SimulatedCampaign& c) {
    Json j;
    j["schema"] = "fuzz-assure/truth/v1";
    j["seed"] = c.seed;
    j["n"] = c.records.size();
    Json model;
    model["s_true"] = c.model.s_true;
    model["mode"] = std::string(to_string(c.model.mode));
    model["distribution"] = to_json(c.model.distribution);
    model["probabilities"] = c.model.probabilities;
    j["model"] = model;
    Json trace = Json::array();
    for (const auto& t : c.truth_trace) {
        trace.push_back({{"n", t.n}, {"s_observed", t.s_observed}, {"u_true", t.u_true}});
    }
    j["truth_trace"] = trace;
    return j;
}

/// Caveats attached to every report.
struct Assumptions {
    bool iid_caveat = false;
    std::vector<std::string> iid_reasons;
};

inline Json to_json(const Assumptions& a) {
    Json j;
    j["iid_caveat"] = a.iid_caveat;
    j["iid_reasons"] = a.iid_reasons;
    j["oracle_scope_caveat"] = true;
    j["oracle_scope"] = "Guarantees cover only behaviours the test oracle can recognise as species (for example "
                        "crashes detected by a sanitizer).";
    j["search_space_caveat"] = true;
    j["search_space"] = "Guarantees cover only species reachable within this fuzzer's search space.";
    return j;
}

inline Json envelope(const std::vector<std::string>& command, const std::string& input_digest,
                     const Assumptions& assumptions, Json results) {
    Json j;
    j["schema"] = kReportSchema;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["command"] = command;
    j["input_digest"] = input_digest.empty() ? Json(nullptr) : Json(input_digest);
    j["assumptions"] = to_json(assumptions);
    j["results"] = std::move(results);
    return j;
}

/// `m_star,s_pred,u_pred` with a header row.
inline void write_curve_csv(std::ostream& out, const ExtrapolationCurve& curve) {
    out << "m_star,s_pred,u_pred\n";
    for (const auto& p : curve.points) {
        out << p.m_star << ',' << format_double(p.s_pred) << ',' << format_double(p.u_pred) << '\n';
    }
}

inline void write_evaluation_csv(std::ostream& out, const EvaluationTable& table) {
    out << "estimator,checkpoint,reps,mean_truth,mean_estimate,mean_error,mean_abs_error,rmse,"
           "mean_abs_rel_error,ci_coverage\n";
    for (const auto& r : table.rows) {
        out << r.estimator << ',' << r.checkpoint << ',' << r.reps << ',' << format_double(r.mean_truth) << ','
            << format_double(r.mean_estimate) << ',' << format_double(r.mean_error) << ','
            << format_double(r.mean_abs_error) << ',' << format_double(r.rmse) << ','
            << format_double(r.mean_abs_rel_error) << ',' << (r.ci_coverage ? format_double(*r.ci_coverage) : "")
            << '\n';
    }
}

} // namespace fuzz_assure
