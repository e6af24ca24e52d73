#pragma once

// Analytic ground truths for chains with known autocovariance structure:
// asymptotic variance from the autocovariance series, exact batch second
// moments, bias bounds for the (shifted) modified estimator, and Monte
// Carlo checkers for the batch moment limits 3*sigma^4 and sigma^4.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bmclt/errors.hpp"
#include "bmclt/estimators.hpp"
#include "bmclt/rng.hpp"

namespace bmclt {

// Autocovariance sequence gamma(h) with a geometric envelope
// |gamma(h)| <= f0_norm2 * lambda_bound^h.
struct AutocovModel {
    std::function<double(std::int64_t)> gamma;
    double lambda_bound;  // operator-norm bound, in [0,1)
    double f0_norm2;      // second moment of the centered functional
};

// gamma_h = 2^-(1+h) for the toy normal Gibbs chain.
inline double toy_autocovariance(std::int64_t h) {
    return std::ldexp(1.0, static_cast<int>(-(1 + h)));
}

inline AutocovModel toy_autocov_model() {
    return AutocovModel{[](std::int64_t h) { return toy_autocovariance(h); }, 0.5, 0.5};
}

// AR(1) x' = rho x + N(0, tau2): gamma_h = gamma_0 rho^h, gamma_0 = tau2/(1-rho^2).
inline AutocovModel ar1_autocov_model(double rho, double tau2) {
    if (!(std::abs(rho) < 1.0)) throw InvalidRho("ar1_autocov_model: |rho| must be < 1");
    const double gamma0 = tau2 / (1.0 - rho * rho);
    return AutocovModel{
        [gamma0, rho](std::int64_t h) { return gamma0 * std::pow(rho, static_cast<double>(h)); },
        std::abs(rho), gamma0};
}

struct TruncatedSum {
    double value;
    double tail_bound;  // achieved geometric tail bound
};

namespace detail {

// Smallest H with 2*f0_norm2*lambda^(H+1)/(1-lambda) < tol.
inline std::int64_t truncation_horizon(const AutocovModel& model, double tol) {
    if (!(model.lambda_bound >= 0.0 && model.lambda_bound < 1.0))
        throw NonConvergent("autocovariance tail: lambda_bound must be in [0,1)");
    if (model.lambda_bound == 0.0 || model.f0_norm2 == 0.0) return 0;
    const double c = 2.0 * model.f0_norm2 / (1.0 - model.lambda_bound);
    std::int64_t H = 0;
    while (c * std::pow(model.lambda_bound, static_cast<double>(H + 1)) >= tol) ++H;
    return H;
}

}  // namespace detail

// sigma^2 = gamma_0 + 2 * sum_{k>=1} gamma_k, truncated under the geometric
// tail bound.
inline TruncatedSum sigma2_from_autocov(const AutocovModel& model, double tol = 1e-12) {
    const std::int64_t H = detail::truncation_horizon(model, tol);
    double acc = model.gamma(0);
    for (std::int64_t k = 1; k <= H; ++k) acc += 2.0 * model.gamma(k);
    const double tail = 2.0 * model.f0_norm2 *
                        std::pow(model.lambda_bound, static_cast<double>(H + 1)) /
                        (1.0 - model.lambda_bound);
    return TruncatedSum{acc, tail};
}

// b * E(Ybar_1^2) = gamma_0 + (2/b) * sum_{k=1}^{b-1} (b-k) gamma_k, exact.
inline double analytic_batch_second_moment(const AutocovModel& model, std::int64_t b) {
    if (b < 1) throw InvalidParameter("analytic_batch_second_moment: b must be >= 1");
    double acc = model.gamma(0);
    for (std::int64_t k = 1; k < b; ++k)
        acc += 2.0 / static_cast<double>(b) * static_cast<double>(b - k) * model.gamma(k);
    return acc;
}

// (2 sqrt(a)/b) * f0_norm2 * sum_{k>=1} k lambda^k
//   = (2 sqrt(a)/b) * f0_norm2 * lambda / (1-lambda)^2.
inline double bias_upper_bound(std::int64_t a, std::int64_t b, double lambda_bound,
                               double f0_norm2) {
    if (!(lambda_bound >= 0.0 && lambda_bound < 1.0))
        throw InvalidParameter("bias_upper_bound: lambda_bound must be in [0,1)");
    return 2.0 * std::sqrt(static_cast<double>(a)) / static_cast<double>(b) * f0_norm2 *
           lambda_bound / ((1.0 - lambda_bound) * (1.0 - lambda_bound));
}

// Signed value of sqrt(a_n) * (b_n E(Ybar_1^2) - sigma^2)
//   = -(2 sqrt(a)/b) * (sum_{k=1}^{b-1} k gamma_k + b sum_{k>=b} gamma_k),
// with the infinite tail truncated under the same tolerance rule.
inline double shifted_bias(const AutocovModel& model, const BatchSchedule& schedule,
                           double tol = 1e-12) {
    const std::int64_t a = schedule.a_n;
    const std::int64_t b = schedule.b_n;
    double head = 0.0;
    for (std::int64_t k = 1; k < b; ++k) head += static_cast<double>(k) * model.gamma(k);
    const std::int64_t H = detail::truncation_horizon(model, tol);
    double tail = 0.0;
    for (std::int64_t k = b; k <= H; ++k) tail += model.gamma(k);
    return -2.0 * std::sqrt(static_cast<double>(a)) / static_cast<double>(b) *
           (head + static_cast<double>(b) * tail);
}

// Fills a span with consecutive stationary-start f(X_i) values.
using ChainFactory = std::function<void(std::span<double>, RngStream&)>;

// Stationary toy chain segment: init from N(0, 1/2), then x' = x/2 + N(0, 3/8).
inline ChainFactory toy_stationary_factory() {
    return [](std::span<double> out, RngStream& rng) {
        double x = std::sqrt(0.5) * rng.normal();
        const double s = std::sqrt(0.375);
        for (double& v : out) {
            v = x;
            x = 0.5 * x + s * rng.normal();
        }
    };
}

inline ChainFactory white_noise_factory(double variance) {
    const double s = std::sqrt(variance);
    return [s](std::span<double> out, RngStream& rng) {
        for (double& v : out) v = s * rng.normal();
    };
}

struct MomentCheck {
    double estimate;
    double mc_standard_error;
    std::int64_t replicates;
};

// Monte Carlo estimate of E(b^2 Ybar^4) over R single batches (limit 3 sigma^4).
inline MomentCheck empirical_fourth_moment(const ChainFactory& factory, std::int64_t b,
                                           std::int64_t replicates, RngStream& rng) {
    std::vector<double> batch(static_cast<std::size_t>(b));
    double sum = 0.0, sum_sq = 0.0;
    for (std::int64_t r = 0; r < replicates; ++r) {
        factory(batch, rng);
        double m = 0.0;
        for (double v : batch) m += v;
        m /= static_cast<double>(b);
        const double stat = static_cast<double>(b) * static_cast<double>(b) * m * m * m * m;
        sum += stat;
        sum_sq += stat * stat;
    }
    const double R = static_cast<double>(replicates);
    const double mean = sum / R;
    const double var = (sum_sq - R * mean * mean) / (R - 1.0);
    return MomentCheck{mean, std::sqrt(var / R), replicates};
}

// Monte Carlo estimate of E(b^2 Ybar_1^2 Ybar_2^2) over R adjacent batch
// pairs (limit sigma^4).
inline MomentCheck empirical_cross_moment(const ChainFactory& factory, std::int64_t b,
                                          std::int64_t replicates, RngStream& rng) {
    std::vector<double> pair(static_cast<std::size_t>(2 * b));
    double sum = 0.0, sum_sq = 0.0;
    for (std::int64_t r = 0; r < replicates; ++r) {
        factory(pair, rng);
        double m1 = 0.0, m2 = 0.0;
        for (std::int64_t i = 0; i < b; ++i) m1 += pair[static_cast<std::size_t>(i)];
        for (std::int64_t i = b; i < 2 * b; ++i) m2 += pair[static_cast<std::size_t>(i)];
        m1 /= static_cast<double>(b);
        m2 /= static_cast<double>(b);
        const double stat = static_cast<double>(b) * static_cast<double>(b) * m1 * m1 * m2 * m2;
        sum += stat;
        sum_sq += stat * stat;
    }
    const double R = static_cast<double>(replicates);
    const double mean = sum / R;
    const double var = (sum_sq - R * mean * mean) / (R - 1.0);
    return MomentCheck{mean, std::sqrt(var / R), replicates};
}

}  // namespace bmclt
