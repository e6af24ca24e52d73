#pragma once

// Built-in Markov chains and random variate generators: the toy normal
// Gibbs x-subchain (AR(1) with rho = 1/2, tau^2 = 3/8), a general AR(1)
// chain, inverse-gamma and inverse-Gaussian draws, and multivariate normal
// sampling from a precision matrix.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

#include "bmclt/errors.hpp"
#include "bmclt/estimators.hpp"
#include "bmclt/rng.hpp"

namespace bmclt {

// One transition of the toy x-subchain: x' = x/2 + N(0, 3/8).
inline double toy_marginal_step(double x, RngStream& rng) {
    static const double s = std::sqrt(0.375);
    return 0.5 * x + s * rng.normal();
}

inline ChainTrace toy_chain(std::int64_t n, std::int64_t burn_in, double init_x,
                            RngStream& rng) {
    if (n < 1) throw InvalidParameter("toy_chain: n must be >= 1");
    if (burn_in < 0) throw InvalidParameter("toy_chain: burn_in must be >= 0");
    ChainTrace trace;
    trace.values.reserve(static_cast<std::size_t>(n));
    double x = init_x;
    for (std::int64_t i = 0; i < burn_in; ++i) x = toy_marginal_step(x, rng);
    for (std::int64_t i = 0; i < n; ++i) {
        x = toy_marginal_step(x, rng);
        trace.values.push_back(x);
    }
    return trace;
}

inline ChainTrace ar1_chain(double rho, double tau2, std::int64_t n, std::int64_t burn_in,
                            double init, RngStream& rng) {
    if (!(std::abs(rho) < 1.0)) throw InvalidRho("ar1_chain: |rho| must be < 1");
    if (!(tau2 > 0.0)) throw InvalidParameter("ar1_chain: tau2 must be positive");
    if (n < 1) throw InvalidParameter("ar1_chain: n must be >= 1");
    if (burn_in < 0) throw InvalidParameter("ar1_chain: burn_in must be >= 0");
    const double s = std::sqrt(tau2);
    ChainTrace trace;
    trace.values.reserve(static_cast<std::size_t>(n));
    double x = init;
    for (std::int64_t i = 0; i < burn_in + n; ++i) {
        x = rho * x + s * rng.normal();
        if (i >= burn_in) trace.values.push_back(x);
    }
    return trace;
}

namespace detail {

// Marsaglia-Tsang gamma(shape, 1) for shape >= 1.
inline double gamma_unit_ge1(double shape, RngStream& rng) {
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
}

inline double gamma_unit(double shape, RngStream& rng) {
    if (shape >= 1.0) return gamma_unit_ge1(shape, rng);
    // shape boost for shape < 1
    const double g = gamma_unit_ge1(shape + 1.0, rng);
    return g * std::pow(rng.uniform(), 1.0 / shape);
}

}  // namespace detail

// X with 1/X ~ Gamma(shape, rate); mean rate/(shape-1) for shape > 1.
inline double draw_inverse_gamma(double shape, double rate, RngStream& rng) {
    if (!(shape > 0.0)) throw InvalidParameter("draw_inverse_gamma: shape must be positive");
    if (!(rate > 0.0)) throw InvalidParameter("draw_inverse_gamma: rate must be positive");
    double g;
    do {
        g = detail::gamma_unit(shape, rng);
    } while (g == 0.0);
    return rate / g;
}

// Inverse-Gaussian(mu, lambda) via the Michael-Schucany-Haas transformation.
inline double draw_inverse_gaussian(double mu, double shape_lambda, RngStream& rng) {
    if (!(mu > 0.0)) throw InvalidParameter("draw_inverse_gaussian: mu must be positive");
    if (!(shape_lambda > 0.0))
        throw InvalidParameter("draw_inverse_gaussian: shape must be positive");
    const double v = rng.normal();
    const double y = v * v;
    const double x = mu + mu * mu * y / (2.0 * shape_lambda) -
                     mu / (2.0 * shape_lambda) *
                         std::sqrt(4.0 * mu * shape_lambda * y + mu * mu * y * y);
    const double u = rng.uniform();
    double draw = (u <= mu / (mu + x)) ? x : mu * mu / x;
    if (!(draw > 0.0) || !std::isfinite(draw))
        throw NumericalBreakdown("draw_inverse_gaussian: degenerate draw");
    return draw;
}

// Draw from N(A^-1 rhs, scale * A^-1) given the precision matrix A:
// factor A = L L^T, solve A m = rhs, return m + sqrt(scale) * L^-T g.
inline Eigen::VectorXd draw_mvn_precision(const Eigen::VectorXd& mean_rhs,
                                          const Eigen::MatrixXd& precision, double scale,
                                          RngStream& rng) {
    if (!(scale > 0.0)) throw InvalidParameter("draw_mvn_precision: scale must be positive");
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("draw_mvn_precision: Cholesky factorization failed");
    Eigen::VectorXd m = llt.solve(mean_rhs);
    Eigen::VectorXd g(mean_rhs.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = rng.normal();
    Eigen::VectorXd w =
        llt.matrixU().solve((std::sqrt(scale) * g).eval());
    return m + w;
}

}  // namespace bmclt
