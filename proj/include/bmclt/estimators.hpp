#pragma once

// Non-overlapping batch means estimation of the asymptotic (MCMC) variance
// of an ergodic average, with normal-theory confidence intervals for the
// estimate itself, plus MCMCSE, ESS and sample autocovariance helpers.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bmclt/errors.hpp"
#include "bmclt/normal.hpp"

namespace bmclt {

// Ordered sequence of scalar functional evaluations f(X_i) from one chain.
struct ChainTrace {
    std::vector<double> values;

    std::int64_t length() const { return static_cast<std::int64_t>(values.size()); }

    void validate() const {
        if (values.empty()) throw EmptyTrace("ChainTrace: no values");
        for (double v : values)
            if (!std::isfinite(v)) throw NonFiniteInput("ChainTrace: non-finite value");
    }
};

// Batch size rules. Exponent rules floor n^e; Fixed pins the batch size.
struct SqrtN {};
struct Pow {
    double exponent;  // in (0,1)
};
struct CubeRootPlusDelta {
    double delta = 1e-5;  // > 0
};
struct Fixed {
    std::int64_t b;
};
using ScheduleRule = std::variant<SqrtN, Pow, CubeRootPlusDelta, Fixed>;

namespace detail {
// Shortest decimal form that round-trips to the same double.
inline std::string compact_real(double v) {
    char buf[40];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}
}  // namespace detail

inline std::string rule_name(const ScheduleRule& rule) {
    if (std::holds_alternative<SqrtN>(rule)) return "sqrt";
    if (const auto* p = std::get_if<Pow>(&rule)) return "pow:" + detail::compact_real(p->exponent);
    if (const auto* c = std::get_if<CubeRootPlusDelta>(&rule))
        return "cbrt:" + detail::compact_real(c->delta);
    return "fixed:" + std::to_string(std::get<Fixed>(rule).b);
}

struct BatchSchedule {
    std::int64_t n;
    std::int64_t b_n;  // batch size
    std::int64_t a_n;  // number of batches, floor(n / b_n)
    ScheduleRule rule;
};

// b_n = floor(n^e) for exponent rules (a tiny nudge absorbs pow() rounding).
inline BatchSchedule batch_schedule(std::int64_t n, const ScheduleRule& rule) {
    if (n < 4) throw ScheduleDegenerate("batch_schedule: n must be at least 4");
    std::int64_t b;
    if (const auto* f = std::get_if<Fixed>(&rule)) {
        b = f->b;
    } else {
        double e;
        if (std::holds_alternative<SqrtN>(rule))
            e = 0.5;
        else if (const auto* p = std::get_if<Pow>(&rule)) {
            if (!(p->exponent > 0.0 && p->exponent < 1.0))
                throw ScheduleDegenerate("batch_schedule: Pow exponent must be in (0,1)");
            e = p->exponent;
        } else {
            const auto& c = std::get<CubeRootPlusDelta>(rule);
            if (!(c.delta > 0.0))
                throw ScheduleDegenerate("batch_schedule: delta must be positive");
            e = 1.0 / 3.0 + c.delta;
        }
        b = static_cast<std::int64_t>(std::floor(std::pow(static_cast<double>(n), e) + 1e-9));
    }
    if (b < 1) throw ScheduleDegenerate("batch_schedule: batch size < 1");
    std::int64_t a = n / b;
    if (a < 2) throw ScheduleDegenerate("batch_schedule: fewer than 2 batches");
    return BatchSchedule{n, b, a, rule};
}

struct BmEstimate {
    double sigma2_hat;
    BatchSchedule schedule;
    double chain_mean;  // mean of the batch means
};

namespace detail {

// Batch means of the first a*b values.
inline std::vector<double> batch_means(std::span<const double> values, std::int64_t a,
                                       std::int64_t b) {
    std::vector<double> means(static_cast<std::size_t>(a));
    for (std::int64_t k = 0; k < a; ++k) {
        double sum = 0.0;
        const double* block = values.data() + k * b;
        for (std::int64_t i = 0; i < b; ++i) sum += block[i];
        means[static_cast<std::size_t>(k)] = sum / static_cast<double>(b);
    }
    return means;
}

// Two-pass: grand mean of batch means first, then squared deviations.
inline BmEstimate estimate_from_batch_means(const std::vector<double>& means,
                                            const BatchSchedule& schedule) {
    const std::int64_t a = schedule.a_n;
    double grand = 0.0;
    for (double m : means) grand += m;
    grand /= static_cast<double>(a);
    double ss = 0.0;
    for (double m : means) {
        const double d = m - grand;
        ss += d * d;
    }
    const double sigma2 =
        static_cast<double>(schedule.b_n) / static_cast<double>(a - 1) * ss;
    return BmEstimate{sigma2, schedule, grand};
}

}  // namespace detail

// Eq.-style estimator: (b_n/(a_n-1)) * sum_k (Zbar_k - Zbar)^2 over the
// first a_n*b_n values; any trailing remainder is discarded.
inline BmEstimate batch_means_estimate(std::span<const double> values,
                                       const BatchSchedule& schedule) {
    const std::int64_t used = schedule.a_n * schedule.b_n;
    if (static_cast<std::int64_t>(values.size()) < used)
        throw TraceTooShort("batch_means_estimate: trace shorter than a_n*b_n");
    for (std::int64_t i = 0; i < used; ++i)
        if (!std::isfinite(values[static_cast<std::size_t>(i)]))
            throw NonFiniteInput("batch_means_estimate: non-finite value in trace");
    auto means = detail::batch_means(values.first(static_cast<std::size_t>(used)),
                                     schedule.a_n, schedule.b_n);
    return detail::estimate_from_batch_means(means, schedule);
}

inline BmEstimate batch_means_estimate(const ChainTrace& trace, const BatchSchedule& schedule) {
    return batch_means_estimate(std::span<const double>(trace.values), schedule);
}

// ((a_n-1)/a_n) times the plain estimator.
inline BmEstimate modified_batch_means_estimate(std::span<const double> values,
                                                const BatchSchedule& schedule) {
    BmEstimate est = batch_means_estimate(values, schedule);
    est.sigma2_hat *= static_cast<double>(schedule.a_n - 1) / static_cast<double>(schedule.a_n);
    return est;
}

inline BmEstimate modified_batch_means_estimate(const ChainTrace& trace,
                                                const BatchSchedule& schedule) {
    return modified_batch_means_estimate(std::span<const double>(trace.values), schedule);
}

struct ConfidenceInterval {
    double lower;
    double upper;
    double level;
    double truncated_lower;  // max(lower, 0)
};

// sigma2_hat +/- z_{(1+level)/2} * sqrt(2/a_n) * sigma2_hat
inline ConfidenceInterval variance_ci(const BmEstimate& est, double level) {
    if (!(level > 0.0 && level < 1.0)) throw InvalidLevel("variance_ci: level must be in (0,1)");
    const double z = normal_quantile(0.5 * (1.0 + level));
    const double half =
        z * std::sqrt(2.0 / static_cast<double>(est.schedule.a_n)) * est.sigma2_hat;
    ConfidenceInterval ci;
    ci.lower = est.sigma2_hat - half;
    ci.upper = est.sigma2_hat + half;
    ci.level = level;
    ci.truncated_lower = ci.lower > 0.0 ? ci.lower : 0.0;
    return ci;
}

// Monte Carlo standard error of the ergodic average: sqrt(sigma2_hat / n).
inline double mcmcse(const BmEstimate& est) {
    return std::sqrt(est.sigma2_hat / static_cast<double>(est.schedule.n));
}

// Effective sample size: n * (sample variance, divisor n-1) / sigma2_hat.
inline double ess(const ChainTrace& trace, double sigma2_hat) {
    if (!(sigma2_hat > 0.0)) throw ZeroVarianceEstimate("ess: sigma2_hat must be positive");
    const std::int64_t n = trace.length();
    if (n < 2) throw TraceTooShort("ess: need at least 2 values");
    double mean = 0.0;
    for (double v : trace.values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : trace.values) {
        const double d = v - mean;
        ss += d * d;
    }
    const double sample_var = ss / static_cast<double>(n - 1);
    return static_cast<double>(n) * sample_var / sigma2_hat;
}

// Biased (divisor n) sample autocovariance at lag h.
inline double sample_autocovariance(const ChainTrace& trace, std::int64_t h) {
    const std::int64_t n = trace.length();
    if (h < 0 || h >= n) throw LagTooLarge("sample_autocovariance: lag out of range");
    double mean = 0.0;
    for (double v : trace.values) mean += v;
    mean /= static_cast<double>(n);
    double acc = 0.0;
    for (std::int64_t i = 0; i + h < n; ++i)
        acc += (trace.values[static_cast<std::size_t>(i)] - mean) *
               (trace.values[static_cast<std::size_t>(i + h)] - mean);
    return acc / static_cast<double>(n);
}

}  // namespace bmclt
