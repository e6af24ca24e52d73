#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numeric>
#include <vector>

#include "bmclt/estimators.hpp"
#include "bmclt/normal.hpp"
#include "bmclt/rng.hpp"

using namespace bmclt;

namespace {

// Direct two-loop transcription of the estimator definition, kept
// independent of the library implementation.
double brute_force_bm(const std::vector<double>& values, std::int64_t a, std::int64_t b) {
    std::vector<double> means;
    for (std::int64_t k = 0; k < a; ++k) {
        double s = 0.0;
        for (std::int64_t i = 0; i < b; ++i) s += values[static_cast<std::size_t>(k * b + i)];
        means.push_back(s / static_cast<double>(b));
    }
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) /
                         static_cast<double>(a);
    double ss = 0.0;
    for (double m : means) ss += (m - grand) * (m - grand);
    return static_cast<double>(b) / static_cast<double>(a - 1) * ss;
}

std::vector<double> random_trace(std::int64_t n, RngStream& rng) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = 3.0 * rng.normal() + rng.uniform();
    return v;
}

}  // namespace

TEST_CASE("batch_schedule follows floor(n^e)") {
    auto s = batch_schedule(10000, SqrtN{});
    CHECK(s.b_n == 100);
    CHECK(s.a_n == 100);

    s = batch_schedule(100000, Pow{0.4});
    CHECK(s.b_n == 100);
    CHECK(s.a_n == 1000);

    s = batch_schedule(1000, CubeRootPlusDelta{1e-5});
    CHECK(s.b_n == 10);
    CHECK(s.a_n == 100);

    s = batch_schedule(500000, SqrtN{});
    CHECK(s.b_n == 707);
    CHECK(s.a_n == 707);
}

TEST_CASE("batch_schedule rejects degenerate configurations") {
    CHECK_THROWS_AS(batch_schedule(4, Fixed{4}), ScheduleDegenerate);
    CHECK_THROWS_AS(batch_schedule(3, SqrtN{}), ScheduleDegenerate);
    CHECK_THROWS_AS(batch_schedule(100, Pow{1.5}), ScheduleDegenerate);
    CHECK_THROWS_AS(batch_schedule(100, CubeRootPlusDelta{0.0}), ScheduleDegenerate);
}

TEST_CASE("batch means hand cases") {
    std::vector<double> v{1, 2, 3, 4};
    BatchSchedule s{4, 2, 2, Fixed{2}};
    auto est = batch_means_estimate(v, s);
    CHECK(est.sigma2_hat == 4.0);
    CHECK(est.chain_mean == 2.5);

    auto mod = modified_batch_means_estimate(v, s);
    CHECK(mod.sigma2_hat == 2.0);
}

TEST_CASE("constant trace gives zero estimate") {
    std::vector<double> v(100, 3.7);
    auto s = batch_schedule(100, SqrtN{});
    CHECK(batch_means_estimate(v, s).sigma2_hat == 0.0);
    CHECK(modified_batch_means_estimate(v, s).sigma2_hat == 0.0);
}

TEST_CASE("trailing remainder never affects the estimate") {
    RngStream rng(7, 0);
    std::vector<double> v = random_trace(9, rng);
    BatchSchedule s{9, 2, 4, Fixed{2}};
    const double base = batch_means_estimate(v, s).sigma2_hat;
    v[8] = 1e12;
    CHECK(batch_means_estimate(v, s).sigma2_hat == base);
    v.push_back(-4.0e9);
    CHECK(batch_means_estimate(v, s).sigma2_hat == base);
}

TEST_CASE("estimator matches the two-loop oracle") {
    RngStream rng(11, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t b = 1 + static_cast<std::int64_t>(rng.next_u64() % 8);
        const std::int64_t a = 2 + static_cast<std::int64_t>(rng.next_u64() % 7);
        const std::int64_t n = a * b;
        if (n > 64) continue;
        auto v = random_trace(n, rng);
        BatchSchedule s{n, b, a, Fixed{b}};
        const double expected = brute_force_bm(v, a, b);
        const double got = batch_means_estimate(v, s).sigma2_hat;
        CHECK_THAT(got, Catch::Matchers::WithinRel(expected, 1e-12));
    }
}

TEST_CASE("modified equals hat times (a-1)/a, location/scale behavior") {
    RngStream rng(13, 0);
    for (int trial = 0; trial < 30; ++trial) {
        const std::int64_t n = 20 + static_cast<std::int64_t>(rng.next_u64() % 200);
        auto v = random_trace(n, rng);
        auto s = batch_schedule(n, SqrtN{});
        const auto est = batch_means_estimate(v, s);
        const auto mod = modified_batch_means_estimate(v, s);
        CHECK(est.sigma2_hat >= 0.0);
        CHECK_THAT(mod.sigma2_hat,
                   Catch::Matchers::WithinRel(est.sigma2_hat * static_cast<double>(s.a_n - 1) /
                                                  static_cast<double>(s.a_n),
                                              1e-14));

        auto shifted = v;
        for (double& x : shifted) x += 123.456;
        CHECK_THAT(batch_means_estimate(shifted, s).sigma2_hat,
                   Catch::Matchers::WithinRel(est.sigma2_hat, 1e-10));

        auto scaled = v;
        for (double& x : scaled) x *= -2.5;
        CHECK_THAT(batch_means_estimate(scaled, s).sigma2_hat,
                   Catch::Matchers::WithinRel(est.sigma2_hat * 6.25, 1e-10));
    }
}

TEST_CASE("within-batch permutation leaves the estimate unchanged") {
    // mathematically invariant; summation order shifts the last few bits
    RngStream rng(17, 0);
    auto v = random_trace(48, rng);
    BatchSchedule s{48, 6, 8, Fixed{6}};
    const double base = batch_means_estimate(v, s).sigma2_hat;
    for (std::int64_t k = 0; k < 8; ++k) {
        auto perm = v;
        std::reverse(perm.begin() + k * 6, perm.begin() + (k + 1) * 6);
        CHECK_THAT(batch_means_estimate(perm, s).sigma2_hat,
                   Catch::Matchers::WithinRel(base, 1e-13));
    }
}

TEST_CASE("input validation") {
    BatchSchedule s{10, 2, 5, Fixed{2}};
    std::vector<double> shortv{1, 2, 3};
    CHECK_THROWS_AS(batch_means_estimate(shortv, s), TraceTooShort);
    std::vector<double> bad(10, 1.0);
    bad[4] = std::nan("");
    CHECK_THROWS_AS(batch_means_estimate(bad, s), NonFiniteInput);
}

TEST_CASE("variance_ci") {
    BmEstimate est{1.5, BatchSchedule{10000, 100, 100, SqrtN{}}, 0.0};
    auto ci = variance_ci(est, 0.95);
    CHECK_THAT(ci.lower, Catch::Matchers::WithinAbs(1.0843, 5e-4));
    CHECK_THAT(ci.upper, Catch::Matchers::WithinAbs(1.9157, 5e-4));
    CHECK(ci.truncated_lower == ci.lower);

    // the point estimate is inside its own interval
    CHECK(ci.lower <= est.sigma2_hat);
    CHECK(ci.upper >= est.sigma2_hat);

    BmEstimate zero{0.0, est.schedule, 0.0};
    auto zci = variance_ci(zero, 0.95);
    CHECK(zci.lower == 0.0);
    CHECK(zci.upper == 0.0);

    // width scales as 1/sqrt(a_n)
    BmEstimate est4{1.5, BatchSchedule{40000, 100, 400, SqrtN{}}, 0.0};
    auto ci4 = variance_ci(est4, 0.95);
    CHECK_THAT(ci4.upper - ci4.lower, Catch::Matchers::WithinRel(0.5 * (ci.upper - ci.lower), 1e-12));

    // wide estimates can have a negative raw lower bound
    BmEstimate small{1.0, BatchSchedule{8, 2, 4, Fixed{2}}, 0.0};
    auto sci = variance_ci(small, 0.99);
    CHECK(sci.lower < 0.0);
    CHECK(sci.truncated_lower == 0.0);

    CHECK_THROWS_AS(variance_ci(est, 0.0), InvalidLevel);
    CHECK_THROWS_AS(variance_ci(est, 1.0), InvalidLevel);
}

TEST_CASE("mcmcse") {
    BmEstimate est{1.5, BatchSchedule{150, 10, 15, Fixed{10}}, 0.0};
    CHECK_THAT(mcmcse(est), Catch::Matchers::WithinRel(0.1, 1e-14));
    BmEstimate est2{4.0, BatchSchedule{4, 2, 2, Fixed{2}}, 0.0};
    CHECK(mcmcse(est2) == 1.0);
    BmEstimate zero{0.0, est.schedule, 0.0};
    CHECK(mcmcse(zero) == 0.0);
}

TEST_CASE("ess") {
    RngStream rng(19, 0);
    ChainTrace white;
    for (int i = 0; i < 5000; ++i) white.values.push_back(rng.normal());
    const double sample_var = sample_autocovariance(white, 0) * 5000.0 / 4999.0;
    CHECK_THAT(ess(white, sample_var), Catch::Matchers::WithinRel(5000.0, 1e-10));

    ChainTrace trace;
    trace.values.assign(1000, 0.0);
    // synthetic trace with known sample variance 0.5: +-sqrt(0.5 * 999/1000)
    const double amp = std::sqrt(0.5 * 999.0 / 1000.0);
    for (std::size_t i = 0; i < trace.values.size(); ++i)
        trace.values[i] = (i % 2 == 0) ? amp : -amp;
    CHECK_THAT(ess(trace, 1.5), Catch::Matchers::WithinRel(1000.0 * 0.5 / 1.5, 1e-12));

    CHECK_THROWS_AS(ess(trace, 0.0), ZeroVarianceEstimate);
}

TEST_CASE("sample_autocovariance") {
    ChainTrace alt;
    alt.values = {1, -1, 1, -1};
    CHECK_THAT(sample_autocovariance(alt, 1), Catch::Matchers::WithinAbs(-0.75, 1e-15));
    CHECK_THAT(sample_autocovariance(alt, 0), Catch::Matchers::WithinAbs(1.0, 1e-15));

    ChainTrace constant;
    constant.values.assign(20, 2.5);
    for (std::int64_t h = 0; h < 20; ++h) CHECK(sample_autocovariance(constant, h) == 0.0);

    CHECK_THROWS_AS(sample_autocovariance(alt, 4), LagTooLarge);
}

TEST_CASE("normal quantile accuracy") {
    // round trip against the CDF at a spread of probabilities
    for (double p : {1e-6, 0.001, 0.025, 0.2, 0.5, 0.8, 0.975, 0.999, 1.0 - 1e-6}) {
        const double z = normal_quantile(p);
        CHECK_THAT(normal_cdf(z), Catch::Matchers::WithinAbs(p, 1e-12));
    }
    CHECK_THAT(normal_quantile(0.975), Catch::Matchers::WithinAbs(1.959963984540054, 1e-9));
    CHECK_THAT(normal_quantile(0.5), Catch::Matchers::WithinAbs(0.0, 1e-15));
}
