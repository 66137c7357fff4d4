// fuzz-assure: residual risk, extrapolation, stop rules, simulation and
// flakiness diagnosis for fuzzing campaigns.
//
// Exit codes: 0 success, 1 internal error, 2 usage or input error.

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fuzz_assure/fuzz_assure.hpp"

namespace fs = std::filesystem;
using namespace fuzz_assure;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

/// Raised for command-line misuse that CLI11 cannot detect itself.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            throw std::runtime_error("sha256 init failed");
        }
    }

    void update(std::string_view data) {
        if (EVP_DigestUpdate(ctx_.get(), data.data(), data.size()) != 1) {
            throw std::runtime_error("sha256 update failed");
        }
    }

    void update_file(const fs::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw ParseError("cannot read " + path.string(), path.string());
        }
        char buf[1 << 16];
        while (in.read(buf, sizeof buf) || in.gcount() > 0) {
            update(std::string_view(buf, static_cast<std::size_t>(in.gcount())));
        }
    }

    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_.get(), md, &len);
        static constexpr char kHex[] = "0123456789abcdef";
        std::string out = "sha256:";
        for (unsigned i = 0; i < len; ++i) {
            out += kHex[md[i] >> 4];
            out += kHex[md[i] & 15];
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

/// Content hash of a campaign file, or of a showmap directory as the
/// sequence (name, size, bytes) of its files in processing order.
std::string input_digest(const fs::path& path) {
    Sha256 h;
    if (fs::is_directory(path)) {
        for (const auto& file : showmap_files(path)) {
            const std::string name = file.filename().string();
            h.update(name);
            h.update(std::string_view("\0", 1));
            h.update(std::to_string(fs::file_size(file)));
            h.update(std::string_view("\0", 1));
            h.update_file(file);
        }
    } else {
        h.update_file(path);
    }
    return h.hex();
}

std::uint64_t default_seed() {
    const char* env = std::getenv("FUZZ_ASSURE_SEED");
    if (env == nullptr || *env == '\0') {
        return 0;
    }
    std::uint64_t seed = 0;
    const std::string_view s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw UsageError("FUZZ_ASSURE_SEED must be a non-negative integer");
    }
    return seed;
}

struct InputOptions {
    std::string path;
    std::string format = "auto";
    bool skip_bad_records = false;
    std::optional<std::string> prefix;
    std::optional<std::string> filter_prefix;

    void add_to(CLI::App* cmd) {
        cmd->add_option("input", path, "Campaign file (JSONL, CSV) or showmap directory")
            ->required()
            ->check(CLI::ExistingPath);
        cmd->add_option("--format", format, "Input format")
            ->check(CLI::IsMember({"auto", "jsonl", "csv", "showmap"}))
            ->capture_default_str();
        cmd->add_flag("--skip-bad-records", skip_bad_records, "Skip and count malformed records");
        cmd->add_option("--prefix", prefix, "Prefix added to every species id on ingest");
        cmd->add_option("--filter-prefix", filter_prefix, "Analyse only species whose id starts with this prefix");
    }

    FormatDescriptor descriptor() const {
        FormatDescriptor d;
        d.kind = format == "auto" ? detect_format(path) : *parse_format_kind(format);
        d.skip_bad_records = skip_bad_records;
        d.species_prefix = prefix;
        return d;
    }

    CampaignSnapshot load(ParseStats& stats) const {
        CampaignSnapshot snap = read_snapshot(path, descriptor(), &stats);
        if (filter_prefix) {
            snap = filter_by_prefix(snap, *filter_prefix);
        }
        return snap;
    }
};

struct UnseenOptions {
    std::optional<double> f0;
    std::optional<std::uint64_t> total_species;

    void add_to(CLI::App* cmd) {
        auto* f0_opt = cmd->add_option("--f0", f0, "Unseen-species count to use instead of Chao1")
                           ->check(CLI::NonNegativeNumber);
        cmd->add_option("--total-species", total_species, "Known total number of species S")
            ->excludes(f0_opt);
    }

    double resolve(const AssuranceReport& base) const {
        if (f0) {
            return *f0;
        }
        if (total_species) {
            if (*total_species < base.s_obs) {
                throw UsageError("--total-species is smaller than the observed species count");
            }
            return static_cast<double>(*total_species - base.s_obs);
        }
        return base.f0_hat;
    }
};

std::vector<std::string> command_echo(int argc, char** argv) {
    std::vector<std::string> out;
    for (int i = 1; i < argc; ++i) {
        out.emplace_back(argv[i]);
    }
    return out;
}

void emit(const Json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<double> read_series(const fs::path& path, std::size_t column) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path.string(), path.string());
    }
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        for (char& c : line) {
            if (c == ',' || c == '\t' || c == ';' || c == '\r') {
                c = ' ';
            }
        }
        std::istringstream fields(line);
        std::vector<std::string> cols;
        for (std::string f; fields >> f;) {
            cols.push_back(f);
        }
        if (cols.empty() || cols.front().starts_with('#')) {
            continue;
        }
        if (column >= cols.size()) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": missing column " +
                                 std::to_string(column),
                             path.string(), line_no);
        }
        const std::string& f = cols[column];
        double v = 0.0;
        const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
        if (res.ec != std::errc() || res.ptr != f.data() + f.size() || std::isnan(v)) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": not a number: " + f, path.string(),
                             line_no);
        }
        values.push_back(v);
    }
    return values;
}

struct ModelOptions {
    std::string dist = "uniform";
    std::uint64_t species = 1000;
    double alpha = 1.0;
    double q = 0.99;
    double core_mass = 0.9;
    std::uint64_t islands = 0;
    std::string mode = "abundance";
    double incidence_mass = 1.0;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--dist", dist, "Species distribution")
            ->check(CLI::IsMember({"uniform", "zipf", "geometric", "endemic"}))
            ->capture_default_str();
        cmd->add_option("--species", species, "True number of species S")->capture_default_str();
        cmd->add_option("--alpha", alpha, "Zipf exponent")->capture_default_str();
        cmd->add_option("--q", q, "Geometric ratio")->capture_default_str();
        cmd->add_option("--core-mass", core_mass, "Endemic: probability mass on core species")->capture_default_str();
        cmd->add_option("--islands", islands, "Endemic: number of island species (default: 90% of S)");
        cmd->add_option("--mode", mode, "Sampling mode")
            ->check(CLI::IsMember({"abundance", "incidence"}))
            ->capture_default_str();
        cmd->add_option("--incidence-mass", incidence_mass, "Incidence mode: mean species per input")
            ->capture_default_str();
    }

    GroundTruthModel build() const {
        Distribution d = dist::Uniform{};
        if (dist == "zipf") {
            d = dist::Zipf{alpha};
        } else if (dist == "geometric") {
            d = dist::Geometric{q};
        } else if (dist == "endemic") {
            d = dist::Endemic{core_mass, islands > 0 ? islands : std::max<std::uint64_t>(1, species * 9 / 10)};
        }
        return build_model(species, d, mode == "incidence" ? SamplingMode::incidence : SamplingMode::abundance,
                           incidence_mass);
    }
};

int run(int argc, char** argv) {
    CLI::App app{"Statistical assurances for fuzzing campaigns", "fuzz-assure"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    const std::vector<std::string> echo = command_echo(argc, argv);

    // analyze ---------------------------------------------------------------
    auto* analyze = app.add_subcommand("analyze", "Residual risk and richness estimates as a JSON report");
    InputOptions analyze_in;
    analyze_in.add_to(analyze);
    bool feedback_driven = false;
    std::optional<std::string> iid_series;
    double iid_alpha = 0.05;
    std::size_t boot_reps = 0;
    double boot_level = 0.95;
    std::optional<std::uint64_t> boot_seed;
    std::string boot_method = "automatic";
    analyze->add_flag("--feedback-driven", feedback_driven,
                      "Campaign came from a feedback-driven fuzzer (sets the IID caveat)");
    analyze->add_option("--iid-series", iid_series, "Numeric series checked with the turning point test")
        ->check(CLI::ExistingFile);
    analyze->add_option("--iid-alpha", iid_alpha, "Significance level of the IID check")->capture_default_str();
    analyze->add_option("--bootstrap", boot_reps, "Bootstrap resamples for interval estimates (0 disables, >= 100)");
    analyze->add_option("--level", boot_level, "Bootstrap confidence level")->capture_default_str();
    analyze->add_option("--seed", boot_seed, "Bootstrap seed (default: $FUZZ_ASSURE_SEED or 0)");
    analyze->add_option("--bootstrap-method", boot_method, "Bootstrap interval method")
        ->check(CLI::IsMember({"automatic", "percentile", "basic", "studentized"}))
        ->capture_default_str();

    // extrapolate -----------------------------------------------------------
    auto* extrapolate = app.add_subcommand("extrapolate", "Species and risk extrapolation curve as CSV");
    InputOptions extrap_in;
    extrap_in.add_to(extrapolate);
    UnseenOptions extrap_unseen;
    extrap_unseen.add_to(extrapolate);
    Count horizon = 0;
    Count steps = 20;
    std::optional<std::string> curve_out;
    extrapolate->add_option("--horizon", horizon, "Largest number of additional inputs m*")->required();
    extrapolate->add_option("--steps", steps, "Number of evenly spaced horizons")->capture_default_str();
    extrapolate->add_option("--out", curve_out, "Write the CSV here instead of standard output");

    // stoprule --------------------------------------------------------------
    auto* stoprule = app.add_subcommand("stoprule", "Additional inputs needed to reach a residual-risk threshold");
    InputOptions stop_in;
    stop_in.add_to(stoprule);
    UnseenOptions stop_unseen;
    stop_unseen.add_to(stoprule);
    double theta = 0.0;
    stoprule->add_option("--risk", theta, "Allowed residual risk, in (0, 1)")->required();

    // simulate --------------------------------------------------------------
    auto* simulate_cmd = app.add_subcommand("simulate", "Generate a synthetic campaign with known ground truth");
    ModelOptions sim_model;
    sim_model.add_to(simulate_cmd);
    Count sim_tests = 0;
    std::optional<std::uint64_t> sim_seed;
    std::string sim_out;
    simulate_cmd->add_option("--tests", sim_tests, "Number of test inputs n")->required();
    simulate_cmd->add_option("--seed", sim_seed, "Seed (default: $FUZZ_ASSURE_SEED or 0)");
    simulate_cmd->add_option("--out", sim_out, "Campaign output path (.jsonl or .csv); truth goes to <out>.truth.json")
        ->required();

    // evaluate --------------------------------------------------------------
    auto* evaluate = app.add_subcommand("evaluate", "Score every estimator against simulated ground truth (CSV)");
    ModelOptions eval_model;
    eval_model.add_to(evaluate);
    Count eval_tests = 0;
    std::size_t eval_reps = 100;
    std::optional<std::uint64_t> eval_seed;
    std::size_t eval_boot = 0;
    evaluate->add_option("--tests", eval_tests, "Campaign length n")->required();
    evaluate->add_option("--reps", eval_reps, "Replicates")->capture_default_str();
    evaluate->add_option("--seed", eval_seed, "Seed (default: $FUZZ_ASSURE_SEED or 0)");
    evaluate->add_option("--bootstrap", eval_boot, "Bootstrap resamples for interval coverage (0 disables)");

    // turningpoint ----------------------------------------------------------
    auto* turning = app.add_subcommand("turningpoint", "Turning point test for IID observations");
    std::string series_path;
    double tp_alpha = 0.05;
    std::size_t tp_column = 0;
    turning->add_option("input", series_path, "File with one observation per line")
        ->required()
        ->check(CLI::ExistingFile);
    turning->add_option("--alpha", tp_alpha, "Significance level")->capture_default_str();
    turning->add_option("--column", tp_column, "0-based column holding the observation")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (analyze->parsed()) {
        ParseStats stats;
        const CampaignSnapshot snap = analyze_in.load(stats);
        Assumptions assumptions;
        Json results;
        results["report"] = to_json(full_report(snap));
        results["ingest"] = to_json(stats);
        if (feedback_driven) {
            assumptions.iid_caveat = true;
            assumptions.iid_reasons.push_back("declared feedback-driven fuzzer");
        }
        if (iid_series) {
            try {
                const TurningPointResult tp = turning_point_test(read_series(*iid_series, 0), iid_alpha);
                results["iid_check"] = to_json(tp);
                if (tp.iid_rejected) {
                    assumptions.iid_caveat = true;
                    assumptions.iid_reasons.push_back("turning point test rejected IID (p=" +
                                                      format_double(tp.p_value) + ")");
                }
            } catch (const DegenerateSeries& e) {
                results["iid_check"] = {{"status", "degenerate_series"}, {"message", e.what()}};
            }
        }
        if (boot_reps > 0) {
            BootstrapOptions bo;
            bo.reps = boot_reps;
            bo.level = boot_level;
            bo.seed = boot_seed ? *boot_seed : default_seed();
            bo.method = *parse_bootstrap_method(boot_method);
            std::vector<IncidenceRecord> records = read_records(analyze_in.path, analyze_in.descriptor());
            if (analyze_in.filter_prefix) {
                for (auto& r : records) {
                    std::erase_if(r.species, [&](const SpeciesId& s) {
                        return !s.str().starts_with(*analyze_in.filter_prefix);
                    });
                }
            }
            const DenseCampaign dense = DenseCampaign::from_records(records);
            Json intervals = Json::array();
            for (auto est : {BootstrapEstimator::u_hat, BootstrapEstimator::s_hat, BootstrapEstimator::f0_hat,
                             BootstrapEstimator::g_hat}) {
                BootstrapOptions opt = bo;
                if (opt.method == BootstrapMethod::studentized && est != BootstrapEstimator::u_hat) {
                    opt.method = BootstrapMethod::basic;
                }
                try {
                    intervals.push_back(to_json(bootstrap_ci(dense, est, opt), bo.level));
                } catch (const EmptyCampaign& e) {
                    intervals.push_back({{"estimator", std::string(to_string(est))}, {"error", e.what()}});
                } catch (const BootstrapError& e) {
                    intervals.push_back({{"estimator", std::string(to_string(est))}, {"error", e.what()}});
                }
            }
            results["bootstrap"] = {{"seed", bo.seed}, {"intervals", intervals}};
        }
        emit(envelope(echo, input_digest(analyze_in.path), assumptions, results));
        return kExitOk;
    }

    if (extrapolate->parsed()) {
        ParseStats stats;
        const CampaignSnapshot snap = extrap_in.load(stats);
        const AssuranceReport base = full_report(snap);
        const ExtrapolationCurve curve =
            extrapolation_curve(snap.stats(), horizon, steps, extrap_unseen.resolve(base));
        if (curve_out) {
            std::ofstream out(*curve_out, std::ios::binary);
            if (!out) {
                throw UsageError("cannot write " + *curve_out);
            }
            write_curve_csv(out, curve);
        } else {
            write_curve_csv(std::cout, curve);
        }
        return kExitOk;
    }

    if (stoprule->parsed()) {
        if (!(theta > 0.0 && theta < 1.0)) {
            throw InvalidThreshold("--risk must lie in (0, 1)");
        }
        ParseStats stats;
        const CampaignSnapshot snap = stop_in.load(stats);
        const AssuranceReport base = full_report(snap);
        const double f0 = stop_unseen.resolve(base);
        const StopRuleResult sr = stop_rule(base.n, base.f1, f0, theta);
        Json results;
        results["report"] = to_json(base);
        results["stop_rule"] = to_json(sr, theta, f0);
        results["stop_rule"]["forward_verified"] =
            sr.risk_at_m_star <= theta && (sr.m_star == 0 || *sr.risk_before_m_star > theta);
        emit(envelope(echo, input_digest(stop_in.path), Assumptions{}, results));
        return kExitOk;
    }

    if (simulate_cmd->parsed()) {
        const GroundTruthModel model = sim_model.build();
        const std::uint64_t seed = sim_seed ? *sim_seed : default_seed();
        const SimulatedCampaign campaign = simulate(model, sim_tests, seed);
        const fs::path out_path(sim_out);
        {
            std::ofstream out(out_path, std::ios::binary);
            if (!out) {
                throw UsageError("cannot write " + sim_out);
            }
            if (out_path.extension() == ".csv") {
                write_csv(out, campaign.records);
            } else {
                write_jsonl(out, campaign.records);
            }
        }
        const std::string truth_path = sim_out + ".truth.json";
        {
            std::ofstream out(truth_path, std::ios::binary);
            if (!out) {
                throw UsageError("cannot write " + truth_path);
            }
            out << truth_sidecar(campaign).dump(2) << '\n';
        }
        const TruthPoint& last = campaign.truth_trace.back();
        Json results;
        results["campaign"] = sim_out;
        results["truth"] = truth_path;
        results["n"] = campaign.records.size();
        results["seed"] = seed;
        results["model"] = {{"s_true", model.s_true},
                            {"mode", std::string(to_string(model.mode))},
                            {"distribution", to_json(model.distribution)}};
        results["s_observed"] = last.s_observed;
        results["u_true"] = last.u_true;
        emit(envelope(echo, input_digest(out_path), Assumptions{}, results));
        return kExitOk;
    }

    if (evaluate->parsed()) {
        const GroundTruthModel model = eval_model.build();
        EvaluationOptions eo;
        eo.bootstrap_reps = eval_boot;
        if (eval_boot > 0 && eval_boot < 100) {
            throw UsageError("--bootstrap needs at least 100 resamples");
        }
        write_evaluation_csv(std::cout,
                             evaluate_estimators(model, eval_tests, eval_reps, eval_seed ? *eval_seed : default_seed(), eo));
        return kExitOk;
    }

    if (turning->parsed()) {
        const std::vector<double> series = read_series(series_path, tp_column);
        Json results;
        try {
            results = to_json(turning_point_test(series, tp_alpha));
        } catch (const DegenerateSeries& e) {
            std::cerr << "fuzz-assure: DegenerateSeries: " << e.what() << '\n';
            results = {{"status", "degenerate_series"},
                       {"original_length", series.size()},
                       {"iid_rejected", false},
                       {"message", e.what()}};
        }
        emit(envelope(echo, input_digest(series_path), Assumptions{}, results));
        return kExitOk;
    }
    return kExitUsage;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const EmptyCampaign& e) {
        std::cerr << "fuzz-assure: " << e.what() << '\n';
        return kExitUsage;
    } catch (const SeriesTooShort& e) {
        std::cerr << "fuzz-assure: SeriesTooShort: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "fuzz-assure: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "fuzz-assure: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "fuzz-assure: internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}
