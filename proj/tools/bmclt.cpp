// bmclt command line tool: batch means variance estimation with CLT-based
// confidence intervals, built-in samplers, replicated experiments and
// analytic oracle checks.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <unistd.h>

#include "bmclt/estimators.hpp"
#include "bmclt/harness.hpp"
#include "bmclt/io.hpp"
#include "bmclt/lasso.hpp"
#include "bmclt/oracles.hpp"
#include "bmclt/samplers.hpp"
#include "bmclt/version.hpp"

namespace fs = std::filesystem;

namespace {

std::uint64_t default_seed(std::uint64_t cli_seed, bool seed_given) {
    if (seed_given) return cli_seed;
    if (const char* env = std::getenv("BMCLT_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

// Non-seekable stdin is buffered to a temporary file so the two-pass
// streaming estimator can re-read it.
fs::path buffer_stdin_to_temp() {
    fs::path path = fs::temp_directory_path() /
                    ("bmclt_stdin_" + std::to_string(::getpid()) + ".csv");
    std::ofstream out(path, std::ios::binary);
    out << std::cin.rdbuf();
    return path;
}

int run_estimate(const std::string& input, const std::string& rule_text, double level,
                 std::uint64_t seed) {
    bmclt::ScheduleRule rule = bmclt::parse_rule(rule_text);
    fs::path path;
    bool temp = false;
    if (input == "-") {
        path = buffer_stdin_to_temp();
        temp = true;
    } else {
        path = input;
    }
    auto [est, ci] = bmclt::estimate_trace_file(path.string(), rule, level);
    if (temp) fs::remove(path);

    std::cout << "{\n\"tool\":\"" << bmclt::version_string << "\",\n"
              << "\"base_seed\":" << seed << ",\n"
              << "\"estimate\":{"
              << "\"sigma2_hat\":" << bmclt::fmt_real(est.sigma2_hat)
              << ",\"n\":" << est.schedule.n << ",\"b_n\":" << est.schedule.b_n
              << ",\"a_n\":" << est.schedule.a_n << ",\"rule\":\""
              << bmclt::rule_name(est.schedule.rule) << "\""
              << ",\"chain_mean\":" << bmclt::fmt_real(est.chain_mean)
              << ",\"mcmcse\":" << bmclt::fmt_real(bmclt::mcmcse(est))
              << ",\"ci\":{\"lower\":" << bmclt::fmt_real(ci.lower)
              << ",\"upper\":" << bmclt::fmt_real(ci.upper)
              << ",\"truncated_lower\":" << bmclt::fmt_real(ci.truncated_lower)
              << ",\"level\":" << bmclt::fmt_real(ci.level) << "}}\n}\n";
    return 0;
}

int run_simulate(const std::string& model, std::int64_t n, std::int64_t burn_in,
                 std::uint64_t seed, std::uint64_t stream, double rho, double tau2,
                 const std::string& y_csv, const std::string& x_csv, double lambda,
                 const std::string& rate_mode, const std::string& ig_mode,
                 const std::string& output) {
    bmclt::RngStream rng(seed, stream);
    bmclt::ChainTrace trace;
    if (model == "toy") {
        trace = bmclt::toy_chain(n, burn_in, rng.normal(), rng);
    } else if (model == "ar1") {
        trace = bmclt::ar1_chain(rho, tau2, n, burn_in, rng.normal(), rng);
    } else if (model == "lasso") {
        if (y_csv.empty() || x_csv.empty())
            throw bmclt::ConfigInvalid("simulate lasso: --y-csv and --x-csv are required");
        bmclt::LassoData data = bmclt::read_lasso_csv(y_csv, x_csv, lambda);
        bmclt::EtaRateMode rm = rate_mode == "as-printed" ? bmclt::EtaRateMode::AsPrinted
                                                          : bmclt::EtaRateMode::Blocked;
        bmclt::TauModeIG tm = ig_mode == "as-printed" ? bmclt::TauModeIG::AsPrinted
                                                      : bmclt::TauModeIG::Standard;
        bmclt::LassoState state = bmclt::lasso_initial_state(data.p(), rng);
        trace.values.reserve(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < burn_in + n; ++i) {
            state = bmclt::lasso_gibbs_step(state, data, rng, rm, tm);
            if (i >= burn_in) trace.values.push_back(bmclt::lasso_log_likelihood(state, data));
        }
    } else {
        throw bmclt::ConfigInvalid("simulate: model must be toy, ar1 or lasso");
    }

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (output != "-") {
        file.open(output);
        if (!file) throw bmclt::ConfigInvalid("cannot open output file '" + output + "'");
        out = &file;
    }
    *out << "value\n";
    for (double v : trace.values) *out << bmclt::fmt_real(v) << "\n";
    return 0;
}

int run_experiment_cmd(const std::string& config_path, const std::string& out_dir) {
    bmclt::ExperimentFile file = bmclt::parse_experiment_file(config_path);
    bmclt::ResultDocument doc;
    doc.result = bmclt::run_experiment(file.config);
    std::cerr << "experiment: " << file.config.replicates << " replicates in "
              << doc.result.wall_clock_seconds << " s\n";

    if (file.truth) doc.coverage = bmclt::compute_coverage(doc.result, *file.truth,
                                                           file.config.level);
    if (file.histograms) {
        for (std::int64_t n : file.config.checkpoints) {
            for (const auto& rule : file.config.rules) {
                bmclt::StandardizationMode mode =
                    file.truth ? bmclt::StandardizationMode(bmclt::ExactTruth{*file.truth})
                               : bmclt::StandardizationMode(bmclt::Approximate{});
                auto values = bmclt::standardize(doc.result, n, rule, mode);
                auto hist = bmclt::histogram_export(values, file.histogram_bins,
                                                    file.histogram_lo, file.histogram_hi);
                if (file.truth) {
                    hist.standardization_mean = hist.standardization_sd = *file.truth;
                    hist.standardization_mode = "exact-truth";
                } else {
                    const double center = bmclt::replicate_mean_estimate(
                        doc.result, file.config.checkpoints.back(), rule);
                    hist.standardization_mean = hist.standardization_sd = center;
                    hist.standardization_mode = "approximate";
                }
                doc.histograms.emplace_back(
                    "n" + std::to_string(n) + "_" + bmclt::rule_name(rule), std::move(hist));
            }
        }
    }

    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "result.json", std::ios::binary);
        bmclt::write_result_document(doc, out, &file);
    }
    if (!doc.coverage.empty()) {
        std::ofstream out(fs::path(out_dir) / "coverage.csv");
        bmclt::write_coverage_csv(doc.coverage, out);
    }
    for (const auto& [name, hist] : doc.histograms) {
        std::string safe = name;  // rule names may contain ':' and '.'
        for (char& c : safe)
            if (c == ':' || c == '.') c = '-';
        std::ofstream out(fs::path(out_dir) / ("hist_" + safe + ".csv"));
        bmclt::write_histogram_csv(hist, out);
    }
    return 0;
}

int run_oracle(const std::string& check, std::uint64_t seed) {
    using std::printf;
    if (check == "toy-sigma2") {
        auto [value, tail] = bmclt::sigma2_from_autocov(bmclt::toy_autocov_model(), 1e-12);
        const bool pass = std::abs(value - 1.5) <= 1e-10;
        printf("toy-sigma2: %.12g (tail bound %.3g) -> %s\n", value, tail,
               pass ? "PASS" : "FAIL");
        return pass ? 0 : 2;
    }
    if (check == "bias-bound") {
        const auto model = bmclt::toy_autocov_model();
        bool pass = true;
        for (std::int64_t a : {2, 4, 8, 16, 32, 64}) {
            for (std::int64_t b : {2, 4, 8, 16, 32, 64}) {
                bmclt::BatchSchedule s{a * b, b, a, bmclt::Fixed{b}};
                const double bias = bmclt::shifted_bias(model, s);
                const double upper =
                    bmclt::bias_upper_bound(a, b, model.lambda_bound, model.f0_norm2);
                const double lower = 4.0 * std::sqrt(static_cast<double>(a)) /
                                     static_cast<double>(b) * model.gamma(2);
                if (!(std::abs(bias) <= upper && std::abs(bias) >= lower)) {
                    pass = false;
                    printf("bias-bound: a=%lld b=%lld |bias|=%.6g outside [%.6g, %.6g]\n",
                           static_cast<long long>(a), static_cast<long long>(b),
                           std::abs(bias), lower, upper);
                }
            }
        }
        printf("bias-bound: grid {2..64}^2 -> %s\n", pass ? "PASS" : "FAIL");
        return pass ? 0 : 2;
    }
    if (check == "moment-a2" || check == "moment-a3") {
        const bool fourth = check == "moment-a2";
        const double limit = fourth ? 6.75 : 2.25;
        const std::int64_t b = 4096, R = 20000;
        auto factory = bmclt::toy_stationary_factory();
        bmclt::RngStream rng(seed, 1);
        bmclt::RngStream rng_half(seed, 2);
        auto run = fourth ? bmclt::empirical_fourth_moment : bmclt::empirical_cross_moment;
        auto full = run(factory, b, R, rng);
        auto half = run(factory, b / 2, R, rng_half);
        const double slack = std::abs(full.estimate - half.estimate);
        const double tol = 4.0 * (full.mc_standard_error + slack);
        const bool pass = std::abs(full.estimate - limit) <= tol;
        printf("%s: estimate %.6g (SE %.3g, b-slack %.3g), limit %.4g, tol %.3g -> %s\n",
               check.c_str(), full.estimate, full.mc_standard_error, slack, limit, tol,
               pass ? "PASS" : "FAIL");
        return pass ? 0 : 2;
    }
    throw bmclt::ConfigInvalid("unknown oracle check '" + check + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"batch means MCMC variance estimation with CLT confidence intervals"};
    app.set_version_flag("--version", bmclt::version_string);
    app.require_subcommand(1);

    // estimate
    auto* est = app.add_subcommand("estimate", "estimate sigma^2 from a trace CSV");
    std::string est_input = "-";
    std::string est_rule = "sqrt";
    double est_level = 0.95;
    std::uint64_t est_seed = 0;
    bool est_seed_given = false;
    est->add_option("--input", est_input, "trace CSV path, or - for stdin");
    est->add_option("--rule", est_rule, "batch rule: sqrt | pow:E | cbrt[:delta] | fixed:B");
    est->add_option("--level", est_level, "confidence level in (0,1)");
    est->add_option("--seed", est_seed, "seed echoed into the output document")
        ->each([&](const std::string&) { est_seed_given = true; });

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a trace CSV from a built-in sampler");
    std::string sim_model = "toy";
    std::int64_t sim_n = 10000, sim_burn = 0;
    std::uint64_t sim_seed = 0, sim_stream = 0;
    bool sim_seed_given = false;
    double sim_rho = 0.5, sim_tau2 = 0.375, sim_lambda = 1.0;
    std::string sim_y, sim_x, sim_rate = "blocked", sim_ig = "standard", sim_out = "-";
    sim->add_option("--model", sim_model, "toy | ar1 | lasso");
    sim->add_option("--n", sim_n, "post-burn-in iterations");
    sim->add_option("--burn-in", sim_burn, "burn-in iterations");
    sim->add_option("--seed", sim_seed, "RNG seed")
        ->each([&](const std::string&) { sim_seed_given = true; });
    sim->add_option("--stream", sim_stream, "RNG stream id");
    sim->add_option("--rho", sim_rho, "AR(1) coefficient");
    sim->add_option("--tau2", sim_tau2, "AR(1) innovation variance");
    sim->add_option("--y-csv", sim_y, "lasso response CSV");
    sim->add_option("--x-csv", sim_x, "lasso design CSV");
    sim->add_option("--lambda", sim_lambda, "lasso sparsity hyperparameter");
    sim->add_option("--rate-mode", sim_rate, "lasso eta^2 rate: blocked | as-printed");
    sim->add_option("--ig-mode", sim_ig, "lasso tau draw: standard | as-printed");
    sim->add_option("--output", sim_out, "output path, or - for stdout");

    // experiment
    auto* exp = app.add_subcommand("experiment", "run a replicated experiment from a config");
    std::string exp_config, exp_out = ".";
    exp->add_option("--config", exp_config, "experiment config file")->required();
    exp->add_option("--out", exp_out, "output directory");

    // oracle
    auto* ora = app.add_subcommand("oracle", "run an analytic or Monte Carlo oracle check");
    std::string ora_check;
    std::uint64_t ora_seed = 0;
    bool ora_seed_given = false;
    ora->add_option("--check", ora_check,
                    "toy-sigma2 | bias-bound | moment-a2 | moment-a3")
        ->required();
    ora->add_option("--seed", ora_seed, "RNG seed for Monte Carlo checks")
        ->each([&](const std::string&) { ora_seed_given = true; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (est->parsed())
            return run_estimate(est_input, est_rule, est_level,
                                default_seed(est_seed, est_seed_given));
        if (sim->parsed())
            return run_simulate(sim_model, sim_n, sim_burn,
                                default_seed(sim_seed, sim_seed_given), sim_stream, sim_rho,
                                sim_tau2, sim_y, sim_x, sim_lambda, sim_rate, sim_ig, sim_out);
        if (exp->parsed()) return run_experiment_cmd(exp_config, exp_out);
        if (ora->parsed()) return run_oracle(ora_check, default_seed(ora_seed, ora_seed_given));
    } catch (const bmclt::NumericalBreakdown& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const bmclt::NotPositiveDefinite& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const bmclt::NonConvergent& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const bmclt::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
