#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fuzz_assure/fuzz_assure.hpp"

using namespace fuzz_assure;
namespace fs = std::filesystem;

namespace {

const fs::path kCli = FUZZ_ASSURE_CLI;
const fs::path kSamples = FUZZ_ASSURE_SAMPLES_DIR;

struct Run {
    int code = -1;
    std::string out;
};

/// Runs the CLI with `args` (already shell-quoted where needed); stderr is
/// discarded unless `env` redirects it.
Run run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " '" + kCli.string() + "' " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) {
        return r;
    }
    char buf[4096];
    std::size_t got = 0;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) {
        r.out.append(buf, got);
    }
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string stderr_of(const std::string& args) {
    const std::string cmd = "'" + kCli.string() + "' " + args + " 2>&1 >/dev/null";
    std::string out;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    char buf[4096];
    std::size_t got = 0;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) {
        out.append(buf, got);
    }
    ::pclose(pipe);
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("fuzz_assure_cli_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override {
        std::error_code ec;
        fs::remove_all(dir_, ec);
    }
    std::string tmp(const std::string& name) const { return "'" + (dir_ / name).string() + "'"; }
    fs::path dir_;
};

std::string sample(const std::string& name) { return "'" + (kSamples / name).string() + "'"; }

} // namespace

TEST_F(CliTest, AnalyzeReportsAllEstimates) {
    const auto r = run("analyze " + sample("campaign.jsonl"));
    ASSERT_EQ(r.code, 0);
    const auto j = Json::parse(r.out);
    const auto& rep = j["results"]["report"];
    for (const char* key : {"u_hat", "s_hat", "f0_hat", "g_hat"}) {
        EXPECT_TRUE(rep.contains(key)) << key;
    }
    EXPECT_EQ(rep["u_hat"].get<double>(), 0.1);
    EXPECT_EQ(rep["s_hat"].get<double>(), 60.0);
    EXPECT_TRUE(j["assumptions"]["oracle_scope_caveat"].get<bool>());
    EXPECT_EQ(j["input_digest"].get<std::string>().rfind("sha256:", 0), 0u);
}

TEST_F(CliTest, AnalyzeShowmapAndCsv) {
    const auto a = Json::parse(run("analyze " + sample("showmap")).out);
    EXPECT_EQ(a["results"]["report"]["n"], 5);
    EXPECT_EQ(a["results"]["report"]["s_obs"], 4);
    const auto b = Json::parse(run("analyze " + sample("campaign.csv")).out);
    EXPECT_EQ(b["results"]["report"], Json::parse(run("analyze " + sample("campaign.jsonl")).out)["results"]["report"]);
}

TEST_F(CliTest, EmptyCampaignIsInputError) {
    std::ofstream(dir_ / "empty.jsonl").close();
    EXPECT_EQ(run("analyze " + tmp("empty.jsonl")).code, 2);
    EXPECT_NE(stderr_of("analyze " + tmp("empty.jsonl")).find("empty campaign"), std::string::npos);
}

TEST_F(CliTest, ParseErrorsAndUsage) {
    std::ofstream(dir_ / "bad.jsonl") << "{\"id\":\"a\",\"species\":[]}\nnope\n";
    EXPECT_EQ(run("analyze " + tmp("bad.jsonl")).code, 2);
    EXPECT_NE(stderr_of("analyze " + tmp("bad.jsonl")).find(":2:"), std::string::npos);
    EXPECT_EQ(run("analyze --skip-bad-records " + tmp("bad.jsonl")).code, 0);
    EXPECT_EQ(run("analyze " + tmp("missing.jsonl")).code, 2);
    EXPECT_EQ(run("no-such-command").code, 2);
    EXPECT_EQ(run("extrapolate " + sample("campaign.jsonl")).code, 2);
}

TEST_F(CliTest, ReportsAreByteIdentical) {
    const auto a = run("analyze --bootstrap 200 --seed 3 " + sample("campaign.jsonl"));
    const auto b = run("analyze --bootstrap 200 --seed 3 " + sample("campaign.jsonl"));
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    const auto j = Json::parse(a.out);
    EXPECT_TRUE(j["results"].contains("bootstrap"));
}

TEST_F(CliTest, ExtrapolateSingleStep) {
    const auto r = run("extrapolate " + sample("campaign.jsonl") + " --horizon 100 --steps 1");
    ASSERT_EQ(r.code, 0);
    std::istringstream in(r.out);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) {
        lines.push_back(l);
    }
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0], "m_star,s_pred,u_pred");
    EXPECT_EQ(lines[1], "100," + format_double(extrapolate_species(50, 100, 10, 10.0, 100)) + "," +
                            format_double(extrapolate_risk(100, 10, 10.0, 100)));
}

TEST_F(CliTest, ExtrapolateCurveMatchesScalars) {
    const auto r = run("extrapolate " + sample("campaign.jsonl") + " --horizon 1000 --steps 25 --out " +
                       tmp("curve.csv"));
    ASSERT_EQ(r.code, 0);
    std::istringstream in(slurp(dir_ / "curve.csv"));
    std::string line;
    std::getline(in, line);
    double prev_u = 1.0;
    int rows = 0;
    while (std::getline(in, line)) {
        std::istringstream f(line);
        std::string m, s, u;
        std::getline(f, m, ',');
        std::getline(f, s, ',');
        std::getline(f, u, ',');
        const Count mm = std::stoull(m);
        EXPECT_EQ(std::stod(s), extrapolate_species(50, 100, 10, 10.0, mm));
        EXPECT_EQ(std::stod(u), extrapolate_risk(100, 10, 10.0, mm));
        EXPECT_LE(std::stod(u), prev_u);
        prev_u = std::stod(u);
        ++rows;
    }
    EXPECT_EQ(rows, 25);
}

TEST_F(CliTest, StopRule) {
    const auto j = Json::parse(run("stoprule " + sample("campaign.jsonl") + " --risk 0.01").out);
    EXPECT_EQ(j["results"]["stop_rule"]["m_star"], 231);
    EXPECT_TRUE(j["results"]["stop_rule"]["forward_verified"].get<bool>());
    const auto above = Json::parse(run("stoprule " + sample("campaign.jsonl") + " --risk 0.2").out);
    EXPECT_EQ(above["results"]["stop_rule"]["m_star"], 0);
    for (const char* bad : {"0", "1", "-0.5", "1.5", "abc"}) {
        EXPECT_EQ(run("stoprule " + sample("campaign.jsonl") + " --risk " + bad).code, 2) << bad;
    }
}

TEST_F(CliTest, SimulateDeterministicWithTruth) {
    ASSERT_EQ(run("simulate --dist uniform --species 10 --tests 50 --seed 4 --out " + tmp("a.jsonl")).code, 0);
    ASSERT_EQ(run("simulate --dist uniform --species 10 --tests 50 --seed 4 --out " + tmp("b.jsonl")).code, 0);
    EXPECT_EQ(slurp(dir_ / "a.jsonl"), slurp(dir_ / "b.jsonl"));
    const auto truth = Json::parse(slurp(dir_ / "a.jsonl.truth.json"));
    ASSERT_EQ(truth["model"]["probabilities"].size(), 10u);
    for (const auto& p : truth["model"]["probabilities"]) {
        EXPECT_EQ(p.get<double>(), 0.1);
    }
    EXPECT_EQ(run("analyze " + tmp("a.jsonl")).code, 0);
    EXPECT_EQ(run("simulate --dist nope --tests 5 --out " + tmp("c.jsonl")).code, 2);
    EXPECT_EQ(run("simulate --dist zipf --alpha 0 --tests 5 --out " + tmp("c.jsonl")).code, 2);
}

TEST_F(CliTest, SeedFromEnvironment) {
    const std::string args = "simulate --dist zipf --species 100 --tests 40 --out ";
    ASSERT_EQ(run(args + tmp("env.jsonl"), "FUZZ_ASSURE_SEED=9").code, 0);
    ASSERT_EQ(run(args + tmp("flag.jsonl") + " --seed 9").code, 0);
    ASSERT_EQ(run(args + tmp("zero.jsonl")).code, 0);
    EXPECT_EQ(slurp(dir_ / "env.jsonl"), slurp(dir_ / "flag.jsonl"));
    EXPECT_NE(slurp(dir_ / "env.jsonl"), slurp(dir_ / "zero.jsonl"));
}

TEST_F(CliTest, SimulateCsvOutput) {
    ASSERT_EQ(run("simulate --dist geometric --q 0.9 --species 30 --tests 60 --seed 2 --out " + tmp("c.csv")).code, 0);
    ASSERT_EQ(run("simulate --dist geometric --q 0.9 --species 30 --tests 60 --seed 2 --out " + tmp("c.jsonl")).code,
              0);
    EXPECT_EQ(Json::parse(run("analyze " + tmp("c.csv")).out)["results"]["report"],
              Json::parse(run("analyze " + tmp("c.jsonl")).out)["results"]["report"]);
}

TEST_F(CliTest, TurningPoint) {
    const auto mono = run("turningpoint " + sample("series_monotone.txt"));
    ASSERT_EQ(mono.code, 0);
    EXPECT_TRUE(Json::parse(mono.out)["results"]["iid_rejected"].get<bool>());
    const auto flat = run("turningpoint " + sample("series_constant.txt"));
    EXPECT_EQ(Json::parse(flat.out)["results"]["status"], "degenerate_series");
    EXPECT_NE(stderr_of("turningpoint " + sample("series_constant.txt")).find("DegenerateSeries"), std::string::npos);
    std::ofstream(dir_ / "short.txt") << "1\n2\n";
    EXPECT_EQ(run("turningpoint " + tmp("short.txt")).code, 2);
    std::ofstream(dir_ / "junk.txt") << "1\nx\n3\n";
    EXPECT_EQ(run("turningpoint " + tmp("junk.txt")).code, 2);
}

TEST_F(CliTest, AnalyzeIidCaveats) {
    const auto j = Json::parse(
        run("analyze --feedback-driven --iid-series " + sample("series_monotone.txt") + " " + sample("campaign.jsonl"))
            .out);
    EXPECT_TRUE(j["assumptions"]["iid_caveat"].get<bool>());
    EXPECT_GE(j["assumptions"]["iid_reasons"].size(), 2u);
}

TEST_F(CliTest, Evaluate) {
    const auto r = run("evaluate --dist uniform --species 100 --tests 100 --reps 5 --seed 1");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out.rfind("estimator,checkpoint,reps,", 0), 0u);
    EXPECT_EQ(r.out, run("evaluate --dist uniform --species 100 --tests 100 --reps 5 --seed 1").out);
}
