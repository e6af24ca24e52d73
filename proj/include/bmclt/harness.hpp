#pragma once

// Replicated-experiment engine: R independent chains, one RNG stream per
// replicate, batch means estimates at checkpoint prefixes for each schedule
// rule, plus coverage tables, standardization and histogram exports. Results
// are identical for any worker count.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "bmclt/errors.hpp"
#include "bmclt/estimators.hpp"
#include "bmclt/lasso.hpp"
#include "bmclt/oracles.hpp"
#include "bmclt/samplers.hpp"

namespace bmclt {

struct ToyModel {};
struct Ar1Model {
    double rho;
    double tau2;
};
struct LassoModel {
    std::shared_ptr<const LassoData> data;
    EtaRateMode rate_mode = EtaRateMode::Blocked;
    TauModeIG tau_mode = TauModeIG::Standard;
};
using ModelSpec = std::variant<ToyModel, Ar1Model, LassoModel>;

inline std::string model_name(const ModelSpec& model) {
    if (std::holds_alternative<ToyModel>(model)) return "toy";
    if (std::holds_alternative<Ar1Model>(model)) return "ar1";
    return "lasso";
}

struct ExperimentConfig {
    ModelSpec model;
    std::int64_t replicates;
    std::int64_t burn_in;
    std::vector<std::int64_t> checkpoints;  // ascending values of n
    std::vector<ScheduleRule> rules;
    double level;
    std::uint64_t base_seed;
    int workers = 1;

    void validate() const {
        if (replicates < 1) throw ConfigInvalid("ExperimentConfig: replicates must be >= 1");
        if (burn_in < 0) throw ConfigInvalid("ExperimentConfig: burn_in must be >= 0");
        if (checkpoints.empty()) throw ConfigInvalid("ExperimentConfig: no checkpoints");
        for (std::size_t i = 0; i < checkpoints.size(); ++i) {
            if (checkpoints[i] < 1)
                throw ConfigInvalid("ExperimentConfig: checkpoints must be positive");
            if (i > 0 && checkpoints[i] <= checkpoints[i - 1])
                throw ConfigInvalid("ExperimentConfig: checkpoints must be strictly ascending");
        }
        if (rules.empty()) throw ConfigInvalid("ExperimentConfig: no schedule rules");
        if (!(level > 0.0 && level < 1.0))
            throw ConfigInvalid("ExperimentConfig: level must be in (0,1)");
        if (workers < 1) throw ConfigInvalid("ExperimentConfig: workers must be >= 1");
    }
};

// One (replicate, checkpoint, rule) estimate, or a failure record.
struct CellEstimate {
    bool ok = false;
    double sigma2_hat = 0.0;
    std::int64_t n = 0;
    std::int64_t b_n = 0;
    std::int64_t a_n = 0;
    double chain_mean = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    std::string error;
};

struct ReplicationResult {
    ExperimentConfig config;
    // cells[replicate][checkpoint][rule]
    std::vector<std::vector<std::vector<CellEstimate>>> cells;
    double wall_clock_seconds = 0.0;  // informational; never serialized

    const CellEstimate& cell(std::int64_t rep, std::size_t chk, std::size_t rule) const {
        return cells[static_cast<std::size_t>(rep)][chk][rule];
    }
};

namespace detail {

// Post-burn-in f(X_i) stream of the requested length for one replicate.
inline std::vector<double> replicate_trace(const ModelSpec& model, std::int64_t n,
                                           std::int64_t burn_in, RngStream& rng) {
    if (std::holds_alternative<ToyModel>(model)) {
        return toy_chain(n, burn_in, rng.normal(), rng).values;
    }
    if (const auto* ar = std::get_if<Ar1Model>(&model)) {
        return ar1_chain(ar->rho, ar->tau2, n, burn_in, rng.normal(), rng).values;
    }
    const auto& lm = std::get<LassoModel>(model);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    LassoState state = lasso_initial_state(lm.data->p(), rng);
    for (std::int64_t i = 0; i < burn_in + n; ++i) {
        state = lasso_gibbs_step(state, *lm.data, rng, lm.rate_mode, lm.tau_mode);
        if (i >= burn_in) out.push_back(lasso_log_likelihood(state, *lm.data));
    }
    return out;
}

inline void run_replicate(const ExperimentConfig& config, std::int64_t rep,
                          std::vector<std::vector<CellEstimate>>& out) {
    const std::int64_t max_n = config.checkpoints.back();
    RngStream rng(config.base_seed, static_cast<std::uint64_t>(rep));

    std::vector<double> trace;
    std::string chain_error;
    try {
        trace = replicate_trace(config.model, max_n, config.burn_in, rng);
    } catch (const Error& e) {
        chain_error = e.what();
    }

    out.resize(config.checkpoints.size());
    for (std::size_t ci = 0; ci < config.checkpoints.size(); ++ci) {
        const std::int64_t n = config.checkpoints[ci];
        out[ci].resize(config.rules.size());
        for (std::size_t ri = 0; ri < config.rules.size(); ++ri) {
            CellEstimate& cell = out[ci][ri];
            if (!chain_error.empty()) {
                cell.error = chain_error;
                continue;
            }
            try {
                BatchSchedule schedule = batch_schedule(n, config.rules[ri]);
                BmEstimate est = batch_means_estimate(
                    std::span<const double>(trace.data(), static_cast<std::size_t>(n)),
                    schedule);
                ConfidenceInterval ci_est = variance_ci(est, config.level);
                cell.ok = true;
                cell.sigma2_hat = est.sigma2_hat;
                cell.n = schedule.n;
                cell.b_n = schedule.b_n;
                cell.a_n = schedule.a_n;
                cell.chain_mean = est.chain_mean;
                cell.ci_lower = ci_est.lower;
                cell.ci_upper = ci_est.upper;
            } catch (const Error& e) {
                cell.error = e.what();
            }
        }
    }
}

}  // namespace detail

inline ReplicationResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    ReplicationResult result;
    result.config = config;
    result.cells.resize(static_cast<std::size_t>(config.replicates));

    const auto start = std::chrono::steady_clock::now();
    std::atomic<std::int64_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::int64_t rep = next.fetch_add(1);
            if (rep >= config.replicates) break;
            detail::run_replicate(config, rep, result.cells[static_cast<std::size_t>(rep)]);
        }
    };
    if (config.workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(config.workers));
        for (int w = 0; w < config.workers; ++w) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    result.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

struct CoverageRow {
    std::int64_t n;
    std::string rule;
    double coverage;
    std::int64_t interval_count;  // ok cells entering the denominator
    std::int64_t failed_count;
};

// Fraction of replicates whose RAW (untruncated) interval at the given level
// contains the truth; failed cells are excluded from the denominator.
inline std::vector<CoverageRow> compute_coverage(const ReplicationResult& result, double truth,
                                                 double level) {
    if (!std::isfinite(truth)) throw InvalidParameter("compute_coverage: truth must be finite");
    if (!(level > 0.0 && level < 1.0)) throw InvalidLevel("compute_coverage: level in (0,1)");
    const double z = normal_quantile(0.5 * (1.0 + level));
    std::vector<CoverageRow> rows;
    for (std::size_t ci = 0; ci < result.config.checkpoints.size(); ++ci) {
        for (std::size_t ri = 0; ri < result.config.rules.size(); ++ri) {
            std::int64_t covered = 0, ok = 0, failed = 0;
            for (std::int64_t rep = 0; rep < result.config.replicates; ++rep) {
                const CellEstimate& cell = result.cell(rep, ci, ri);
                if (!cell.ok) {
                    ++failed;
                    continue;
                }
                ++ok;
                const double half =
                    z * std::sqrt(2.0 / static_cast<double>(cell.a_n)) * cell.sigma2_hat;
                if (cell.sigma2_hat - half <= truth && truth <= cell.sigma2_hat + half)
                    ++covered;
            }
            if (ok == 0) throw MissingCells("compute_coverage: no successful cells");
            rows.push_back(CoverageRow{result.config.checkpoints[ci],
                                       rule_name(result.config.rules[ri]),
                                       static_cast<double>(covered) / static_cast<double>(ok),
                                       ok, failed});
        }
    }
    return rows;
}

// Replicate-average estimate at a given checkpoint and rule (ok cells only).
inline double replicate_mean_estimate(const ReplicationResult& result, std::int64_t n,
                                      const ScheduleRule& rule) {
    const std::string tag = rule_name(rule);
    for (std::size_t ci = 0; ci < result.config.checkpoints.size(); ++ci) {
        if (result.config.checkpoints[ci] != n) continue;
        for (std::size_t ri = 0; ri < result.config.rules.size(); ++ri) {
            if (rule_name(result.config.rules[ri]) != tag) continue;
            double sum = 0.0;
            std::int64_t count = 0;
            for (std::int64_t rep = 0; rep < result.config.replicates; ++rep) {
                const CellEstimate& cell = result.cell(rep, ci, ri);
                if (!cell.ok) continue;
                sum += cell.sigma2_hat;
                ++count;
            }
            if (count == 0) throw MissingCells("replicate_mean_estimate: no successful cells");
            return sum / static_cast<double>(count);
        }
    }
    throw MissingCells("replicate_mean_estimate: requested (n, rule) not in the experiment");
}

struct ExactTruth {
    double sigma2;
};
struct Approximate {};
using StandardizationMode = std::variant<ExactTruth, Approximate>;

// (sigma2_hat_r - center) / (scale * sqrt(2/a_n)). Exact mode uses the true
// sigma^2 as center and scale; approximate mode uses the replicate-average
// estimate at the largest checkpoint for the same rule. a_n is n-specific.
inline std::vector<double> standardize(const ReplicationResult& result, std::int64_t n,
                                       const ScheduleRule& rule,
                                       const StandardizationMode& mode) {
    std::size_t ci = result.config.checkpoints.size();
    for (std::size_t i = 0; i < result.config.checkpoints.size(); ++i)
        if (result.config.checkpoints[i] == n) ci = i;
    std::size_t ri = result.config.rules.size();
    const std::string tag = rule_name(rule);
    for (std::size_t i = 0; i < result.config.rules.size(); ++i)
        if (rule_name(result.config.rules[i]) == tag) ri = i;
    if (ci == result.config.checkpoints.size() || ri == result.config.rules.size())
        throw MissingCells("standardize: requested (n, rule) not in the experiment");

    double center, scale;
    if (const auto* exact = std::get_if<ExactTruth>(&mode)) {
        center = scale = exact->sigma2;
    } else {
        const std::size_t last = result.config.checkpoints.size() - 1;
        double sum = 0.0;
        std::int64_t count = 0;
        for (std::int64_t rep = 0; rep < result.config.replicates; ++rep) {
            const CellEstimate& cell = result.cell(rep, last, ri);
            if (!cell.ok) continue;
            sum += cell.sigma2_hat;
            ++count;
        }
        if (count == 0) throw MissingCells("standardize: no successful cells at largest n");
        center = scale = sum / static_cast<double>(count);
    }

    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(result.config.replicates));
    for (std::int64_t rep = 0; rep < result.config.replicates; ++rep) {
        const CellEstimate& cell = result.cell(rep, ci, ri);
        if (!cell.ok) continue;
        out.push_back((cell.sigma2_hat - center) /
                      (scale * std::sqrt(2.0 / static_cast<double>(cell.a_n))));
    }
    return out;
}

struct HistogramExport {
    std::vector<double> bin_edges;  // bins + 1, strictly ascending
    std::vector<std::int64_t> counts;
    std::int64_t underflow = 0;
    std::int64_t overflow = 0;
    double standardization_mean = 0.0;
    double standardization_sd = 0.0;
    std::string standardization_mode;  // "exact-truth" or "approximate"
};

// Equal-width bins over [lo, hi); bin i is half-open [edge_i, edge_{i+1}),
// except the last which also takes hi itself.
inline HistogramExport histogram_export(const std::vector<double>& values, std::int64_t bins,
                                        double lo, double hi) {
    if (!(lo < hi)) throw InvalidRange("histogram_export: need lo < hi");
    if (bins < 1) throw InvalidRange("histogram_export: need at least 1 bin");
    HistogramExport h;
    h.bin_edges.resize(static_cast<std::size_t>(bins + 1));
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::int64_t i = 0; i <= bins; ++i)
        h.bin_edges[static_cast<std::size_t>(i)] = lo + width * static_cast<double>(i);
    h.bin_edges.back() = hi;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        if (v < lo) {
            ++h.underflow;
        } else if (v > hi) {
            ++h.overflow;
        } else {
            std::int64_t idx = static_cast<std::int64_t>(std::floor((v - lo) / width));
            if (idx >= bins) idx = bins - 1;  // v == hi lands in the last bin
            ++h.counts[static_cast<std::size_t>(idx)];
        }
    }
    return h;
}

}  // namespace bmclt
