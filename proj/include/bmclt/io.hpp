#pragma once

// CSV ingestion, experiment config files, streaming estimation from trace
// files, and the result document. Documents are written by a hand-rolled
// JSON emitter with shortest-round-trip reals so identical runs serialize
// to identical bytes; reading goes through nlohmann/json.

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmclt/errors.hpp"
#include "bmclt/estimators.hpp"
#include "bmclt/harness.hpp"
#include "bmclt/version.hpp"

namespace bmclt {

inline std::string fmt_real(double v) { return detail::compact_real(v); }

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline double parse_finite_real(const std::string& token, long line_no) {
    const std::string t = trim(token);
    if (t.empty()) throw ParseError("empty numeric field", line_no);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) throw ParseError("malformed number '" + t + "'", line_no);
    if (!std::isfinite(v)) throw ParseError("non-finite value '" + t + "'", line_no);
    return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Schedule rule text form: sqrt | pow:E | cbrt[:delta] | fixed:B
// ---------------------------------------------------------------------------

inline ScheduleRule parse_rule(const std::string& text) {
    const std::string t = detail::trim(text);
    if (t == "sqrt") return SqrtN{};
    if (t == "cbrt") return CubeRootPlusDelta{1e-5};
    if (t.rfind("pow:", 0) == 0) {
        const double e = detail::parse_finite_real(t.substr(4), 0);
        if (!(e > 0.0 && e < 1.0)) throw ConfigInvalid("rule '" + t + "': exponent not in (0,1)");
        return Pow{e};
    }
    if (t.rfind("cbrt:", 0) == 0) {
        const double d = detail::parse_finite_real(t.substr(5), 0);
        if (!(d > 0.0)) throw ConfigInvalid("rule '" + t + "': delta must be positive");
        return CubeRootPlusDelta{d};
    }
    if (t.rfind("fixed:", 0) == 0) {
        const long b = std::strtol(t.c_str() + 6, nullptr, 10);
        if (b < 1) throw ConfigInvalid("rule '" + t + "': batch size must be positive");
        return Fixed{b};
    }
    throw ConfigInvalid("unknown schedule rule '" + t + "'");
}

// ---------------------------------------------------------------------------
// Trace CSV: one value per line, optional "value" header
// ---------------------------------------------------------------------------

inline ChainTrace read_trace_stream(std::istream& in) {
    ChainTrace trace;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (line_no == 1 && t == "value") continue;
        trace.values.push_back(detail::parse_finite_real(t, line_no));
    }
    if (trace.values.empty()) throw EmptyTrace("trace file contains no values");
    return trace;
}

inline ChainTrace read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open trace file '" + path + "'", 0);
    return read_trace_stream(in);
}

// Two-pass streaming estimate: pass 1 counts and validates, pass 2
// accumulates per-batch sums; only a_n batch means are held in memory.
inline std::pair<BmEstimate, ConfidenceInterval> estimate_trace_file(const std::string& path,
                                                                     const ScheduleRule& rule,
                                                                     double level) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open trace file '" + path + "'", 0);
    std::string line;
    long line_no = 0;
    std::int64_t n = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (line_no == 1 && t == "value") {
            header = true;
            continue;
        }
        detail::parse_finite_real(t, line_no);
        ++n;
    }
    if (n == 0) throw EmptyTrace("trace file contains no values");

    BatchSchedule schedule = batch_schedule(n, rule);
    std::vector<double> means(static_cast<std::size_t>(schedule.a_n), 0.0);

    in.clear();
    in.seekg(0);
    line_no = 0;
    std::int64_t idx = 0;
    const std::int64_t used = schedule.a_n * schedule.b_n;
    while (std::getline(in, line) && idx < used) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (header && line_no == 1) continue;
        means[static_cast<std::size_t>(idx / schedule.b_n)] += detail::parse_finite_real(t, line_no);
        ++idx;
    }
    for (double& m : means) m /= static_cast<double>(schedule.b_n);
    BmEstimate est = detail::estimate_from_batch_means(means, schedule);
    return {est, variance_ci(est, level)};
}

// ---------------------------------------------------------------------------
// Lasso CSV: Y one value per row; X one comma-separated row per observation
// ---------------------------------------------------------------------------

inline LassoData read_lasso_csv(const std::string& y_path, const std::string& x_path,
                                double lambda) {
    std::ifstream yin(y_path);
    if (!yin) throw ParseError("cannot open response file '" + y_path + "'", 0);
    std::vector<double> y_values;
    std::string line;
    long line_no = 0;
    while (std::getline(yin, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (line_no == 1 && (t == "value" || t == "y" || t == "Y")) continue;
        y_values.push_back(detail::parse_finite_real(t, line_no));
    }
    if (y_values.empty()) throw EmptyTrace("response file contains no values");

    std::ifstream xin(x_path);
    if (!xin) throw ParseError("cannot open design file '" + x_path + "'", 0);
    std::vector<std::vector<double>> rows;
    line_no = 0;
    while (std::getline(xin, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        auto fields = detail::split(t, ',');
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(detail::parse_finite_real(f, line_no));
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("ragged design row", line_no);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw EmptyTrace("design file contains no rows");
    if (rows.size() != y_values.size())
        throw DimensionMismatch("response has " + std::to_string(y_values.size()) +
                                " rows but design has " + std::to_string(rows.size()));

    const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index p = static_cast<Eigen::Index>(rows.front().size());
    Eigen::VectorXd Y(m);
    Eigen::MatrixXd X(m, p);
    for (Eigen::Index i = 0; i < m; ++i) {
        Y[i] = y_values[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < p; ++j)
            X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return make_lasso_data(std::move(Y), std::move(X), lambda);
}

// ---------------------------------------------------------------------------
// Experiment config file: flat "key = value" lines, '#' comments
// ---------------------------------------------------------------------------

struct ExperimentFile {
    ExperimentConfig config;
    std::optional<double> truth;      // enables coverage rows
    bool histograms = false;          // emit standardized histograms
    std::int64_t histogram_bins = 40;
    double histogram_lo = -4.0;
    double histogram_hi = 4.0;
    // lasso inputs, echoed into the document
    std::string y_csv;
    std::string x_csv;
    double lambda = 0.0;
    std::string rate_mode = "blocked";
    std::string ig_mode = "standard";
};

inline ExperimentFile parse_experiment_file(std::istream& in) {
    ExperimentFile file;
    ExperimentConfig& cfg = file.config;
    cfg.model = ToyModel{};
    cfg.replicates = 0;
    cfg.burn_in = 0;
    cfg.level = 0.95;
    cfg.base_seed = 0;
    cfg.workers = 1;

    std::string model = "toy";
    double rho = 0.5, tau2 = 0.375;

    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = detail::trim(line);
        const auto hash = t.find('#');
        if (hash != std::string::npos) t = detail::trim(t.substr(0, hash));
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));

        if (key == "model") {
            model = value;
        } else if (key == "rho") {
            rho = detail::parse_finite_real(value, line_no);
        } else if (key == "tau2") {
            tau2 = detail::parse_finite_real(value, line_no);
        } else if (key == "y_csv") {
            file.y_csv = value;
        } else if (key == "x_csv") {
            file.x_csv = value;
        } else if (key == "lambda") {
            file.lambda = detail::parse_finite_real(value, line_no);
        } else if (key == "rate_mode") {
            file.rate_mode = value;
        } else if (key == "ig_mode") {
            file.ig_mode = value;
        } else if (key == "replicates") {
            cfg.replicates = std::strtoll(value.c_str(), nullptr, 10);
        } else if (key == "burn_in") {
            cfg.burn_in = std::strtoll(value.c_str(), nullptr, 10);
        } else if (key == "checkpoints") {
            for (const auto& f : detail::split(value, ','))
                cfg.checkpoints.push_back(std::strtoll(detail::trim(f).c_str(), nullptr, 10));
        } else if (key == "rules") {
            for (const auto& f : detail::split(value, ','))
                cfg.rules.push_back(parse_rule(f));
        } else if (key == "level") {
            cfg.level = detail::parse_finite_real(value, line_no);
        } else if (key == "base_seed") {
            cfg.base_seed = std::strtoull(value.c_str(), nullptr, 10);
        } else if (key == "workers") {
            cfg.workers = static_cast<int>(std::strtol(value.c_str(), nullptr, 10));
        } else if (key == "truth") {
            file.truth = detail::parse_finite_real(value, line_no);
        } else if (key == "histograms") {
            file.histograms = (value == "true" || value == "1" || value == "yes");
        } else if (key == "histogram_bins") {
            file.histogram_bins = std::strtoll(value.c_str(), nullptr, 10);
        } else if (key == "histogram_lo") {
            file.histogram_lo = detail::parse_finite_real(value, line_no);
        } else if (key == "histogram_hi") {
            file.histogram_hi = detail::parse_finite_real(value, line_no);
        } else {
            throw ParseError("unknown config key '" + key + "'", line_no);
        }
    }

    if (model == "toy") {
        cfg.model = ToyModel{};
    } else if (model == "ar1") {
        cfg.model = Ar1Model{rho, tau2};
    } else if (model == "lasso") {
        if (file.y_csv.empty() || file.x_csv.empty())
            throw ConfigInvalid("lasso model requires y_csv and x_csv");
        if (!(file.lambda > 0.0)) throw ConfigInvalid("lasso model requires lambda > 0");
        LassoModel lm;
        lm.data = std::make_shared<LassoData>(read_lasso_csv(file.y_csv, file.x_csv, file.lambda));
        if (file.rate_mode == "blocked")
            lm.rate_mode = EtaRateMode::Blocked;
        else if (file.rate_mode == "as-printed")
            lm.rate_mode = EtaRateMode::AsPrinted;
        else
            throw ConfigInvalid("rate_mode must be 'blocked' or 'as-printed'");
        if (file.ig_mode == "standard")
            lm.tau_mode = TauModeIG::Standard;
        else if (file.ig_mode == "as-printed")
            lm.tau_mode = TauModeIG::AsPrinted;
        else
            throw ConfigInvalid("ig_mode must be 'standard' or 'as-printed'");
        cfg.model = std::move(lm);
    } else {
        throw ConfigInvalid("model must be toy, ar1 or lasso");
    }
    cfg.validate();
    return file;
}

inline ExperimentFile parse_experiment_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigInvalid("cannot open config file '" + path + "'");
    return parse_experiment_file(in);
}

// ---------------------------------------------------------------------------
// Result document
// ---------------------------------------------------------------------------

struct ResultDocument {
    std::string tool = version_string;
    ReplicationResult result;
    std::vector<CoverageRow> coverage;
    std::vector<std::pair<std::string, HistogramExport>> histograms;
};

namespace detail {

inline void write_model(std::ostream& out, const ExperimentConfig& cfg,
                        const ExperimentFile* file) {
    out << "{\"name\":\"" << model_name(cfg.model) << "\"";
    if (const auto* ar = std::get_if<Ar1Model>(&cfg.model)) {
        out << ",\"rho\":" << fmt_real(ar->rho) << ",\"tau2\":" << fmt_real(ar->tau2);
    } else if (std::holds_alternative<LassoModel>(cfg.model)) {
        const auto& lm = std::get<LassoModel>(cfg.model);
        out << ",\"lambda\":" << fmt_real(lm.data ? lm.data->lambda : 0.0);
        out << ",\"rate_mode\":\""
            << (lm.rate_mode == EtaRateMode::Blocked ? "blocked" : "as-printed") << "\"";
        out << ",\"ig_mode\":\""
            << (lm.tau_mode == TauModeIG::Standard ? "standard" : "as-printed") << "\"";
        if (file) {
            out << ",\"y_csv\":\"" << json_escape(file->y_csv) << "\"";
            out << ",\"x_csv\":\"" << json_escape(file->x_csv) << "\"";
        }
    }
    out << "}";
}

inline void write_cell(std::ostream& out, const CellEstimate& cell) {
    out << "{\"ok\":" << (cell.ok ? "true" : "false");
    if (cell.ok) {
        out << ",\"sigma2_hat\":" << fmt_real(cell.sigma2_hat) << ",\"n\":" << cell.n
            << ",\"b_n\":" << cell.b_n << ",\"a_n\":" << cell.a_n
            << ",\"chain_mean\":" << fmt_real(cell.chain_mean)
            << ",\"ci_lower\":" << fmt_real(cell.ci_lower)
            << ",\"ci_upper\":" << fmt_real(cell.ci_upper);
    } else {
        out << ",\"error\":\"" << json_escape(cell.error) << "\"";
    }
    out << "}";
}

}  // namespace detail

inline void write_result_document(const ResultDocument& doc, std::ostream& out,
                                  const ExperimentFile* file = nullptr) {
    const ExperimentConfig& cfg = doc.result.config;
    out << "{\n";
    out << "\"tool\":\"" << detail::json_escape(doc.tool) << "\",\n";
    out << "\"base_seed\":" << cfg.base_seed << ",\n";
    out << "\"config\":{";
    out << "\"model\":";
    detail::write_model(out, cfg, file);
    out << ",\"replicates\":" << cfg.replicates;
    out << ",\"burn_in\":" << cfg.burn_in;
    out << ",\"checkpoints\":[";
    for (std::size_t i = 0; i < cfg.checkpoints.size(); ++i)
        out << (i ? "," : "") << cfg.checkpoints[i];
    out << "],\"rules\":[";
    for (std::size_t i = 0; i < cfg.rules.size(); ++i)
        out << (i ? "," : "") << "\"" << rule_name(cfg.rules[i]) << "\"";
    out << "],\"level\":" << fmt_real(cfg.level);
    out << ",\"workers\":" << cfg.workers << "},\n";

    out << "\"cells\":[";
    for (std::size_t r = 0; r < doc.result.cells.size(); ++r) {
        out << (r ? ",\n" : "\n") << "[";
        const auto& per_chk = doc.result.cells[r];
        for (std::size_t c = 0; c < per_chk.size(); ++c) {
            out << (c ? "," : "") << "[";
            for (std::size_t u = 0; u < per_chk[c].size(); ++u) {
                if (u) out << ",";
                detail::write_cell(out, per_chk[c][u]);
            }
            out << "]";
        }
        out << "]";
    }
    out << "\n]";

    if (!doc.coverage.empty()) {
        out << ",\n\"coverage\":[";
        for (std::size_t i = 0; i < doc.coverage.size(); ++i) {
            const auto& row = doc.coverage[i];
            out << (i ? "," : "") << "\n{\"n\":" << row.n << ",\"rule\":\""
                << detail::json_escape(row.rule) << "\",\"coverage\":" << fmt_real(row.coverage)
                << ",\"interval_count\":" << row.interval_count
                << ",\"failed_count\":" << row.failed_count << "}";
        }
        out << "\n]";
    }

    if (!doc.histograms.empty()) {
        out << ",\n\"histograms\":[";
        for (std::size_t i = 0; i < doc.histograms.size(); ++i) {
            const auto& [name, h] = doc.histograms[i];
            out << (i ? "," : "") << "\n{\"name\":\"" << detail::json_escape(name)
                << "\",\"bin_edges\":[";
            for (std::size_t j = 0; j < h.bin_edges.size(); ++j)
                out << (j ? "," : "") << fmt_real(h.bin_edges[j]);
            out << "],\"counts\":[";
            for (std::size_t j = 0; j < h.counts.size(); ++j)
                out << (j ? "," : "") << h.counts[j];
            out << "],\"underflow\":" << h.underflow << ",\"overflow\":" << h.overflow
                << ",\"standardization\":{\"mean\":" << fmt_real(h.standardization_mean)
                << ",\"sd\":" << fmt_real(h.standardization_sd) << ",\"mode\":\""
                << detail::json_escape(h.standardization_mode) << "\"}}";
        }
        out << "\n]";
    }
    out << "\n}\n";
}

inline std::string serialize_result_document(const ResultDocument& doc,
                                             const ExperimentFile* file = nullptr) {
    std::ostringstream out;
    write_result_document(doc, out, file);
    return out.str();
}

inline ResultDocument read_result_document(std::istream& in) {
    nlohmann::json j = nlohmann::json::parse(in);
    ResultDocument doc;
    doc.tool = j.at("tool").get<std::string>();
    ExperimentConfig& cfg = doc.result.config;
    cfg.base_seed = j.at("base_seed").get<std::uint64_t>();
    const auto& jc = j.at("config");
    const auto& jm = jc.at("model");
    const std::string model = jm.at("name").get<std::string>();
    if (model == "toy") {
        cfg.model = ToyModel{};
    } else if (model == "ar1") {
        cfg.model = Ar1Model{jm.at("rho").get<double>(), jm.at("tau2").get<double>()};
    } else {
        LassoModel lm;  // data is not reloaded; the echo carries the parameters
        lm.rate_mode = jm.at("rate_mode").get<std::string>() == "blocked"
                           ? EtaRateMode::Blocked
                           : EtaRateMode::AsPrinted;
        lm.tau_mode = jm.at("ig_mode").get<std::string>() == "standard" ? TauModeIG::Standard
                                                                        : TauModeIG::AsPrinted;
        cfg.model = std::move(lm);
    }
    cfg.replicates = jc.at("replicates").get<std::int64_t>();
    cfg.burn_in = jc.at("burn_in").get<std::int64_t>();
    for (const auto& c : jc.at("checkpoints")) cfg.checkpoints.push_back(c.get<std::int64_t>());
    for (const auto& r : jc.at("rules")) cfg.rules.push_back(parse_rule(r.get<std::string>()));
    cfg.level = jc.at("level").get<double>();
    cfg.workers = jc.at("workers").get<int>();

    for (const auto& jr : j.at("cells")) {
        std::vector<std::vector<CellEstimate>> per_chk;
        for (const auto& jchk : jr) {
            std::vector<CellEstimate> per_rule;
            for (const auto& jcell : jchk) {
                CellEstimate cell;
                cell.ok = jcell.at("ok").get<bool>();
                if (cell.ok) {
                    cell.sigma2_hat = jcell.at("sigma2_hat").get<double>();
                    cell.n = jcell.at("n").get<std::int64_t>();
                    cell.b_n = jcell.at("b_n").get<std::int64_t>();
                    cell.a_n = jcell.at("a_n").get<std::int64_t>();
                    cell.chain_mean = jcell.at("chain_mean").get<double>();
                    cell.ci_lower = jcell.at("ci_lower").get<double>();
                    cell.ci_upper = jcell.at("ci_upper").get<double>();
                } else {
                    cell.error = jcell.at("error").get<std::string>();
                }
                per_rule.push_back(std::move(cell));
            }
            per_chk.push_back(std::move(per_rule));
        }
        doc.result.cells.push_back(std::move(per_chk));
    }

    if (j.contains("coverage")) {
        for (const auto& jrow : j.at("coverage")) {
            CoverageRow row;
            row.n = jrow.at("n").get<std::int64_t>();
            row.rule = jrow.at("rule").get<std::string>();
            row.coverage = jrow.at("coverage").get<double>();
            row.interval_count = jrow.at("interval_count").get<std::int64_t>();
            row.failed_count = jrow.at("failed_count").get<std::int64_t>();
            doc.coverage.push_back(std::move(row));
        }
    }
    if (j.contains("histograms")) {
        for (const auto& jh : j.at("histograms")) {
            HistogramExport h;
            for (const auto& e : jh.at("bin_edges")) h.bin_edges.push_back(e.get<double>());
            for (const auto& c : jh.at("counts")) h.counts.push_back(c.get<std::int64_t>());
            h.underflow = jh.at("underflow").get<std::int64_t>();
            h.overflow = jh.at("overflow").get<std::int64_t>();
            h.standardization_mean = jh.at("standardization").at("mean").get<double>();
            h.standardization_sd = jh.at("standardization").at("sd").get<double>();
            h.standardization_mode = jh.at("standardization").at("mode").get<std::string>();
            doc.histograms.emplace_back(jh.at("name").get<std::string>(), std::move(h));
        }
    }
    return doc;
}

inline void write_coverage_csv(const std::vector<CoverageRow>& rows, std::ostream& out) {
    out << "n,rule,coverage,interval_count,failed_count\n";
    for (const auto& row : rows)
        out << row.n << "," << row.rule << "," << fmt_real(row.coverage) << ","
            << row.interval_count << "," << row.failed_count << "\n";
}

inline void write_histogram_csv(const HistogramExport& h, std::ostream& out) {
    out << "# underflow=" << h.underflow << " overflow=" << h.overflow << " mode="
        << h.standardization_mode << " mean=" << fmt_real(h.standardization_mean)
        << " sd=" << fmt_real(h.standardization_sd) << "\n";
    out << "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        out << fmt_real(h.bin_edges[i]) << "," << fmt_real(h.bin_edges[i + 1]) << ","
            << h.counts[i] << "\n";
}

}  // namespace bmclt
