#pragma once

// Two-block Gibbs sampler for the Bayesian lasso regression model
//   Y | mu, beta, eta ~ N_m(mu + X beta, eta^2 I),
//   beta ~ N_p(0, eta^2 D_tau), tau_j ~ iid Exponential(lambda^2/2),
// sampling (beta, eta^2) jointly and then tau, plus the log-likelihood
// functional whose asymptotic variance the estimators target.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

#include "bmclt/errors.hpp"
#include "bmclt/rng.hpp"
#include "bmclt/samplers.hpp"

namespace bmclt {

// Choice of the eta^2 conditional rate. Blocked marginalizes beta out of the
// rate (consistent with a genuine two-block draw of (beta, eta^2) | tau);
// AsPrinted uses the current beta in the rate as the sampler is printed.
enum class EtaRateMode { Blocked, AsPrinted };

// Inverse-Gaussian parameterization for 1/tau_j. Standard uses mean
// sqrt(lambda^2 eta^2 / beta_j^2) with shape lambda^2 (the form consistent
// with the Exponential(lambda^2/2) prior); AsPrinted uses mean
// sqrt(lambda eta^2 / beta_j^2) with shape lambda.
enum class TauModeIG { Standard, AsPrinted };

struct LassoData {
    Eigen::VectorXd Y;        // raw responses, length m
    Eigen::MatrixXd X;        // standardized design, m x p
    Eigen::VectorXd Y_tilde;  // centered responses
    double lambda;

    // precomputed
    Eigen::MatrixXd XtX;
    Eigen::VectorXd XtY;
    double YtY;

    std::int64_t m() const { return Y.size(); }
    std::int64_t p() const { return X.cols(); }
};

// Columns rescaled to mean 0 and unit sample standard deviation (divisor m-1).
inline LassoData make_lasso_data(Eigen::VectorXd Y, Eigen::MatrixXd X, double lambda) {
    if (!(lambda > 0.0)) throw InvalidParameter("make_lasso_data: lambda must be positive");
    const Eigen::Index m = Y.size();
    if (m < 2) throw InvalidParameter("make_lasso_data: need at least 2 observations");
    if (X.rows() != m) throw DimensionMismatch("make_lasso_data: X rows != length of Y");
    if (X.cols() < 1) throw InvalidParameter("make_lasso_data: need at least 1 predictor");
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double mean = X.col(j).mean();
        X.col(j).array() -= mean;
        const double sd = std::sqrt(X.col(j).squaredNorm() / static_cast<double>(m - 1));
        if (!(sd > 0.0))
            throw InvalidParameter("make_lasso_data: constant predictor column cannot be standardized");
        X.col(j) /= sd;
    }
    LassoData data;
    data.Y = std::move(Y);
    data.Y_tilde = data.Y.array() - data.Y.mean();
    data.X = std::move(X);
    data.lambda = lambda;
    data.XtX = data.X.transpose() * data.X;
    data.XtY = data.X.transpose() * data.Y_tilde;
    data.YtY = data.Y_tilde.squaredNorm();
    return data;
}

struct LassoState {
    Eigen::VectorXd beta;
    double eta2;
    Eigen::VectorXd tau;

    void validate() const {
        if (!(eta2 > 0.0) || !std::isfinite(eta2))
            throw NumericalBreakdown("LassoState: eta2 not positive finite");
        for (Eigen::Index j = 0; j < tau.size(); ++j)
            if (!(tau[j] > 0.0) || !std::isfinite(tau[j]))
                throw NumericalBreakdown("LassoState: tau not positive finite");
        if (!beta.allFinite()) throw NumericalBreakdown("LassoState: non-finite beta");
    }
};

// beta ~ N_p(0, I), eta2 ~ Exponential(1), tau_j = 1.
inline LassoState lasso_initial_state(std::int64_t p, RngStream& rng) {
    LassoState state;
    state.beta.resize(p);
    for (Eigen::Index j = 0; j < state.beta.size(); ++j) state.beta[j] = rng.normal();
    state.eta2 = -std::log(rng.uniform());
    state.tau = Eigen::VectorXd::Ones(p);
    return state;
}

// -(m/2) log eta^2 - (1/(2 eta^2)) || Y_tilde - X beta ||^2
inline double lasso_log_likelihood(const LassoState& state, const LassoData& data) {
    const double rss = (data.Y_tilde - data.X * state.beta).squaredNorm();
    return -0.5 * static_cast<double>(data.m()) * std::log(state.eta2) -
           rss / (2.0 * state.eta2);
}

inline LassoState lasso_gibbs_step(const LassoState& state, const LassoData& data,
                                   RngStream& rng, EtaRateMode rate_mode = EtaRateMode::Blocked,
                                   TauModeIG tau_mode = TauModeIG::Standard) {
    const std::int64_t m = data.m();
    const std::int64_t p = data.p();

    Eigen::MatrixXd A = data.XtX;
    for (Eigen::Index j = 0; j < p; ++j) A(j, j) += 1.0 / state.tau[j];
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success)
        throw NumericalBreakdown("lasso_gibbs_step: Cholesky factorization of A_tau failed");
    const Eigen::VectorXd cond_mean = llt.solve(data.XtY);

    double rate;
    if (rate_mode == EtaRateMode::Blocked) {
        rate = 0.5 * (data.YtY - data.XtY.dot(cond_mean));
    } else {
        double quad = 0.0;
        for (Eigen::Index j = 0; j < p; ++j)
            quad += state.beta[j] * state.beta[j] / state.tau[j];
        rate = 0.5 * (data.Y_tilde - data.X * state.beta).squaredNorm() + 0.5 * quad;
    }
    if (!(rate > 0.0) || !std::isfinite(rate))
        throw NumericalBreakdown("lasso_gibbs_step: degenerate eta2 rate");

    LassoState next;
    next.eta2 = draw_inverse_gamma(0.5 * static_cast<double>(m + p - 1), rate, rng);

    Eigen::VectorXd g(p);
    for (Eigen::Index j = 0; j < p; ++j) g[j] = rng.normal();
    next.beta = cond_mean + llt.matrixU().solve((std::sqrt(next.eta2) * g).eval());

    next.tau.resize(p);
    const double lam = data.lambda;
    for (Eigen::Index j = 0; j < p; ++j) {
        double bj = std::abs(next.beta[j]);
        if (bj < 1e-300) bj = 1e-300;  // keep the IG mean finite
        double mean, shape;
        if (tau_mode == TauModeIG::Standard) {
            mean = std::sqrt(lam * lam * next.eta2 / (bj * bj));
            shape = lam * lam;
        } else {
            mean = std::sqrt(lam * next.eta2 / (bj * bj));
            shape = lam;
        }
        const double inv_tau = draw_inverse_gaussian(mean, shape, rng);
        next.tau[j] = 1.0 / inv_tau;
    }

    next.validate();
    return next;
}

}  // namespace bmclt
