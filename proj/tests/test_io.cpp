#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bmclt/io.hpp"

using namespace bmclt;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content)
        : path("/tmp/bmclt_test_" + name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("trace csv parsing") {
    std::istringstream plain("1.0\n2.0\n");
    auto trace = read_trace_stream(plain);
    CHECK(trace.values == std::vector<double>{1.0, 2.0});

    std::istringstream with_header("value\n3.5\n-1.25\n\n7\n");
    trace = read_trace_stream(with_header);
    CHECK(trace.values == std::vector<double>{3.5, -1.25, 7.0});

    std::istringstream bad("1.0\n2.0\nnot-a-number\n");
    try {
        read_trace_stream(bad);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 3);
    }

    std::istringstream nan_input("1.0\n2.0\nnan\n");
    CHECK_THROWS_AS(read_trace_stream(nan_input), ParseError);
    std::istringstream inf_input("inf\n");
    CHECK_THROWS_AS(read_trace_stream(inf_input), ParseError);
    std::istringstream empty("\n\n");
    CHECK_THROWS_AS(read_trace_stream(empty), EmptyTrace);
}

TEST_CASE("streaming estimate equals the in-memory estimate") {
    RngStream rng(31, 0);
    std::ostringstream content;
    std::vector<double> values;
    for (int i = 0; i < 1000; ++i) {
        values.push_back(rng.normal() * 2.0 + 1.0);
        content << fmt_real(values.back()) << "\n";
    }
    TempFile file("trace.csv", content.str());

    auto [est, ci] = estimate_trace_file(file.path, SqrtN{}, 0.95);
    auto schedule = batch_schedule(1000, SqrtN{});
    auto expected = batch_means_estimate(values, schedule);
    CHECK_THAT(est.sigma2_hat, Catch::Matchers::WithinRel(expected.sigma2_hat, 1e-12));
    CHECK_THAT(est.chain_mean, Catch::Matchers::WithinRel(expected.chain_mean, 1e-12));
    auto expected_ci = variance_ci(expected, 0.95);
    CHECK_THAT(ci.lower, Catch::Matchers::WithinRel(expected_ci.lower, 1e-12));
    CHECK_THAT(ci.upper, Catch::Matchers::WithinRel(expected_ci.upper, 1e-12));

    CHECK_THROWS_AS(estimate_trace_file("/nonexistent/file.csv", SqrtN{}, 0.95), ParseError);
}

TEST_CASE("lasso csv reading standardizes the design") {
    RngStream rng(32, 0);
    std::ostringstream ycsv, xcsv;
    ycsv << "y\n";
    for (int i = 0; i < 20; ++i) {
        ycsv << fmt_real(rng.normal()) << "\n";
        xcsv << fmt_real(rng.normal() * 3.0 + 1.0) << "," << fmt_real(rng.uniform()) << "\n";
    }
    TempFile yfile("y.csv", ycsv.str());
    TempFile xfile("x.csv", xcsv.str());

    LassoData data = read_lasso_csv(yfile.path, xfile.path, 1.0);
    CHECK(data.m() == 20);
    CHECK(data.p() == 2);
    for (Eigen::Index j = 0; j < 2; ++j)
        CHECK_THAT(data.X.col(j).mean(), Catch::Matchers::WithinAbs(0.0, 1e-12));
    CHECK_THAT(data.Y_tilde.sum(), Catch::Matchers::WithinAbs(0.0, 1e-10));

    TempFile short_y("short_y.csv", "1.0\n2.0\n");
    CHECK_THROWS_AS(read_lasso_csv(short_y.path, xfile.path, 1.0), DimensionMismatch);

    TempFile ragged("ragged_x.csv", "1.0,2.0\n3.0\n");
    TempFile y2("y2.csv", "1.0\n2.0\n");
    CHECK_THROWS_AS(read_lasso_csv(y2.path, ragged.path, 1.0), ParseError);
}

TEST_CASE("schedule rule text round trips") {
    for (const std::string text : {"sqrt", "pow:0.4", "cbrt:1e-05", "fixed:25"}) {
        CHECK(rule_name(parse_rule(text)) == text);
    }
    CHECK(rule_name(parse_rule("cbrt")) == "cbrt:1e-05");
    CHECK_THROWS_AS(parse_rule("pow:1.5"), ConfigInvalid);
    CHECK_THROWS_AS(parse_rule("fixed:0"), ConfigInvalid);
    CHECK_THROWS_AS(parse_rule("bogus"), ConfigInvalid);
}

TEST_CASE("experiment config parsing") {
    std::istringstream in(
        "# toy run\n"
        "model = toy\n"
        "replicates = 12\n"
        "burn_in = 100\n"
        "checkpoints = 1000, 2000\n"
        "rules = sqrt, pow:0.4\n"
        "level = 0.9\n"
        "base_seed = 99\n"
        "workers = 3\n"
        "truth = 1.5\n"
        "histograms = true\n");
    auto file = parse_experiment_file(in);
    CHECK(model_name(file.config.model) == "toy");
    CHECK(file.config.replicates == 12);
    CHECK(file.config.burn_in == 100);
    CHECK(file.config.checkpoints == std::vector<std::int64_t>{1000, 2000});
    REQUIRE(file.config.rules.size() == 2);
    CHECK(rule_name(file.config.rules[1]) == "pow:0.4");
    CHECK(file.config.level == 0.9);
    CHECK(file.config.base_seed == 99);
    CHECK(file.config.workers == 3);
    REQUIRE(file.truth.has_value());
    CHECK(*file.truth == 1.5);
    CHECK(file.histograms);

    std::istringstream ar1(
        "model = ar1\nrho = 0.9\ntau2 = 1.0\nreplicates = 2\n"
        "checkpoints = 1000\nrules = sqrt\nbase_seed = 1\n");
    auto arfile = parse_experiment_file(ar1);
    REQUIRE(std::holds_alternative<Ar1Model>(arfile.config.model));
    CHECK(std::get<Ar1Model>(arfile.config.model).rho == 0.9);

    std::istringstream bad_key("model = toy\nbogus = 1\n");
    CHECK_THROWS_AS(parse_experiment_file(bad_key), ParseError);
    std::istringstream no_eq("model toy\n");
    CHECK_THROWS_AS(parse_experiment_file(no_eq), ParseError);
    std::istringstream missing("model = toy\n");
    CHECK_THROWS_AS(parse_experiment_file(missing), ConfigInvalid);
    std::istringstream lasso_missing(
        "model = lasso\nreplicates = 2\ncheckpoints = 1000\nrules = sqrt\n");
    CHECK_THROWS_AS(parse_experiment_file(lasso_missing), ConfigInvalid);
}

TEST_CASE("result document round trip is byte stable") {
    ExperimentConfig cfg;
    cfg.model = Ar1Model{0.5, 0.375};
    cfg.replicates = 6;
    cfg.burn_in = 50;
    cfg.checkpoints = {500, 1000};
    cfg.rules = {ScheduleRule{SqrtN{}}, ScheduleRule{CubeRootPlusDelta{1e-5}}};
    cfg.level = 0.95;
    cfg.base_seed = 1234;
    cfg.workers = 2;

    ResultDocument doc;
    doc.result = run_experiment(cfg);
    doc.coverage = compute_coverage(doc.result, 1.5, 0.95);
    auto z = standardize(doc.result, 1000, SqrtN{}, ExactTruth{1.5});
    auto h = histogram_export(z, 8, -4.0, 4.0);
    h.standardization_mean = 1.5;
    h.standardization_sd = 1.5;
    h.standardization_mode = "exact-truth";
    doc.histograms.emplace_back("n1000_sqrt", std::move(h));

    const std::string first = serialize_result_document(doc);
    std::istringstream in(first);
    ResultDocument reread = read_result_document(in);
    const std::string second = serialize_result_document(reread);
    CHECK(first == second);

    // the reread carries the same numbers
    CHECK(reread.result.config.base_seed == 1234);
    CHECK(reread.result.cells.size() == 6);
    CHECK(reread.coverage.size() == doc.coverage.size());
    REQUIRE(reread.histograms.size() == 1);
    CHECK(reread.histograms[0].first == "n1000_sqrt");
    CHECK(reread.histograms[0].second.counts == doc.histograms[0].second.counts);
}

TEST_CASE("coverage and histogram csv writers") {
    std::vector<CoverageRow> rows{{10000, "sqrt", 0.946, 1000, 0}};
    std::ostringstream out;
    write_coverage_csv(rows, out);
    CHECK(out.str() ==
          "n,rule,coverage,interval_count,failed_count\n"
          "10000,sqrt,0.946,1000,0\n");

    HistogramExport h;
    h.bin_edges = {0.0, 0.5, 1.0};
    h.counts = {3, 4};
    h.underflow = 1;
    h.overflow = 2;
    h.standardization_mean = 1.5;
    h.standardization_sd = 1.5;
    h.standardization_mode = "exact-truth";
    std::ostringstream hout;
    write_histogram_csv(h, hout);
    CHECK(hout.str().find("bin_lo,bin_hi,count\n") != std::string::npos);
    CHECK(hout.str().find("0,0.5,3\n") != std::string::npos);
    CHECK(hout.str().find("0.5,1,4\n") != std::string::npos);
}
