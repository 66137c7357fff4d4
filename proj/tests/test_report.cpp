#include <gtest/gtest.h>

#include <sstream>

#include "fuzz_assure/report.hpp"

using namespace fuzz_assure;

TEST(Report, EnvelopeLayout) {
    Assumptions a;
    a.iid_caveat = true;
    a.iid_reasons = {"feedback_driven"};
    const Json j = envelope({"fuzz-assure", "analyze", "x.jsonl"}, "abc", a, Json::object());
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) {
        keys.push_back(k);
    }
    EXPECT_EQ(keys, (std::vector<std::string>{"schema", "tool", "version", "command", "input_digest", "assumptions",
                                              "results"}));
    EXPECT_TRUE(j["assumptions"]["iid_caveat"].get<bool>());
    EXPECT_TRUE(j["assumptions"]["oracle_scope_caveat"].get<bool>());
    EXPECT_TRUE(j["assumptions"]["search_space_caveat"].get<bool>());
    EXPECT_TRUE(envelope({}, "", {}, {})["input_digest"].is_null());
}

TEST(Report, AssuranceFields) {
    const Json j = to_json(full_report(SnapshotStats{100, 50, 10, 5}));
    EXPECT_EQ(j["u_hat"].get<double>(), 0.1);
    EXPECT_EQ(j["s_hat"].get<double>(), 60.0);
    EXPECT_EQ(j["f0_hat"].get<double>(), 10.0);
    EXPECT_NEAR(j["g_hat"].get<double>(), 50.0 / 60.0, 1e-15);
    EXPECT_TRUE(to_json(full_report(SnapshotStats{3, 0, 0, 0}))["g_hat"].is_null());
}

TEST(Report, TurningPointWarnings) {
    TurningPointResult r;
    r.ties_collapsed = true;
    r.low_power = true;
    const Json j = to_json(r);
    EXPECT_EQ(j["status"], "ok");
    EXPECT_EQ(j["warnings"], Json::array({"ties_collapsed", "low_power"}));
}

TEST(Report, CurveCsv) {
    const auto curve = extrapolation_curve(SnapshotStats{100, 50, 10, 5}, 100, 2);
    std::ostringstream out;
    write_curve_csv(out, curve);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "m_star,s_pred,u_pred");
    std::getline(in, line);
    EXPECT_EQ(line.substr(0, 3), "50,");
    std::getline(in, line);
    EXPECT_EQ(line.substr(0, 4), "100,");
    const auto s = std::stod(line.substr(4, line.find(',', 4) - 4));
    EXPECT_EQ(s, extrapolate_species(50, 100, 10, 10.0, 100));
}

TEST(Report, FormatDoubleRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, 56.302887876708807, 1e-300, 0.0, 123456789.0}) {
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
}

TEST(Report, TruthSidecar) {
    const auto c = simulate(build_model(10, dist::Uniform{}), 20, 1);
    const Json j = truth_sidecar(c);
    EXPECT_EQ(j["model"]["s_true"], 10);
    for (const auto& p : j["model"]["probabilities"]) {
        EXPECT_EQ(p.get<double>(), 0.1);
    }
    EXPECT_EQ(j["truth_trace"].back()["n"], 20);
}
