#pragma once

// File formats. Signals are CSV `index,re,im`; reports, configs and sweep
// results are JSON. Doubles are written so they parse back bit-identical
// (%.17g in CSV, shortest round-trip form in JSON).

#include "mnnspec/core.hpp"
#include "mnnspec/experiments.hpp"
#include "mnnspec/pipeline.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

namespace mnnspec::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Plain files

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Parse, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Parse, "cannot write " + path);
    out << text;
    if (!out) throw Error(ErrorKind::Parse, "write failed for " + path);
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, what + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Signal CSV

inline std::string signal_to_csv(const Signal& y) {
    std::string out = "index,re,im\n";
    for (Eigen::Index n = 0; n < y.size(); ++n)
        out += std::to_string(n) + "," + format_double(y.samples()[n].real()) + "," + format_double(y.samples()[n].imag()) + "\n";
    return out;
}

namespace detail {

inline double parse_finite(const std::string& field, std::size_t line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != field.size() || !std::isfinite(v))
        throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": bad number '" + field + "'");
    return v;
}

inline std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    return s.substr(i);
}

} // namespace detail

inline Signal signal_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "index,re,im") throw Error(ErrorKind::Parse, "missing header 'index,re,im'");
    std::vector<cplx> samples;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::trim(line);
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(detail::trim(cell));
        if (f.size() != 3) throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected 3 fields");
        const double idx = detail::parse_finite(f[0], line_no);
        if (idx != static_cast<double>(samples.size()))
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": index must run 0, 1, 2, ...");
        samples.emplace_back(detail::parse_finite(f[1], line_no), detail::parse_finite(f[2], line_no));
    }
    if (samples.empty()) throw Error(ErrorKind::Parse, "no samples");
    return Signal(Eigen::Map<const CVec>(samples.data(), static_cast<Eigen::Index>(samples.size())));
}

// ---------------------------------------------------------------------------
// Components ({re, im, normalized_freq})

inline SinusoidSet components_from_json(const json& j) {
    if (!j.is_array()) throw Error(ErrorKind::Parse, "components must be a JSON array");
    SinusoidSet out;
    try {
        for (const auto& c : j)
            out.push_back({cplx(c.at("re").get<double>(), c.at("im").get<double>()), kTwoPi * c.at("normalized_freq").get<double>()});
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("component: ") + e.what());
    }
    return out;
}

inline json components_to_json(const SinusoidSet& s) {
    json out = json::array();
    for (const auto& c : s)
        out.push_back({{"re", c.amplitude.real()}, {"im", c.amplitude.imag()}, {"omega", c.omega}, {"normalized_freq", c.normalized_freq()}});
    return out;
}

// ---------------------------------------------------------------------------
// Config

namespace detail {

inline const char* name(NeighborRule r) { return r == NeighborRule::Both ? "both" : "stronger"; }
inline const char* name(PruneStatistic s) { return s == PruneStatistic::Projection ? "projection" : "partial-residual"; }
inline const char* name(MergePlacement p) { return p == MergePlacement::Midpoint ? "midpoint" : "power-weighted"; }

template <typename E>
E enum_from(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
    for (const auto& [k, v] : table)
        if (s == k) return v;
    throw Error(ErrorKind::Parse, std::string("unknown ") + what + " '" + s + "'");
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

} // namespace detail

inline json config_to_json(const EstimatorConfig& c) {
    return {
        {"init", {{"l_factor", c.init.l_factor}, {"peak_gate_epsilon", c.init.peak_gate_epsilon},
                  {"neighbors", detail::name(c.init.neighbors)}, {"leakage_check", c.init.leakage_check}}},
        {"train", {{"gamma_alpha", detail::optional_number(c.train.gamma_alpha)}, {"gamma_omega", detail::optional_number(c.train.gamma_omega)},
                   {"lambda", c.train.lambda}, {"eps_tol", c.train.eps_tol}, {"max_iter", c.train.max_iter},
                   {"safeguard_patience", c.train.safeguard_patience}}},
        {"order", {{"delta_omega_min", c.order.delta_omega_min}, {"epsilon_f", c.order.epsilon_f}, {"epsilon_a", c.order.epsilon_a},
                   {"statistic", detail::name(c.order.statistic)}, {"placement", detail::name(c.order.placement)},
                   {"redundancy_check", c.order.redundancy_check}, {"epsilon_r", c.order.epsilon_r}}},
        {"max_outer", c.max_outer},
        {"search_eps_tol", c.search_eps_tol},
    };
}

/// Missing keys keep their defaults, so a partial file overrides only what it names.
inline EstimatorConfig config_from_json(const json& j) {
    EstimatorConfig c;
    try {
        if (!j.is_object()) throw Error(ErrorKind::Parse, "config must be a JSON object");
        if (j.contains("init")) {
            const auto& i = j.at("init");
            detail::maybe(i, "l_factor", c.init.l_factor);
            detail::maybe(i, "peak_gate_epsilon", c.init.peak_gate_epsilon);
            detail::maybe(i, "leakage_check", c.init.leakage_check);
            if (i.contains("neighbors"))
                c.init.neighbors = detail::enum_from<NeighborRule>(i.at("neighbors").get<std::string>(),
                                                                   {{"stronger", NeighborRule::Stronger}, {"both", NeighborRule::Both}}, "neighbors");
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            for (auto [key, slot] : {std::pair{"gamma_alpha", &c.train.gamma_alpha}, std::pair{"gamma_omega", &c.train.gamma_omega}})
                if (t.contains(key)) *slot = t.at(key).is_null() ? std::nullopt : std::optional<double>(t.at(key).get<double>());
            detail::maybe(t, "lambda", c.train.lambda);
            detail::maybe(t, "eps_tol", c.train.eps_tol);
            detail::maybe(t, "max_iter", c.train.max_iter);
            detail::maybe(t, "safeguard_patience", c.train.safeguard_patience);
        }
        if (j.contains("order")) {
            const auto& o = j.at("order");
            detail::maybe(o, "delta_omega_min", c.order.delta_omega_min);
            detail::maybe(o, "epsilon_f", c.order.epsilon_f);
            detail::maybe(o, "epsilon_a", c.order.epsilon_a);
            detail::maybe(o, "redundancy_check", c.order.redundancy_check);
            detail::maybe(o, "epsilon_r", c.order.epsilon_r);
            if (o.contains("statistic"))
                c.order.statistic = detail::enum_from<PruneStatistic>(
                    o.at("statistic").get<std::string>(),
                    {{"partial-residual", PruneStatistic::PartialResidual}, {"projection", PruneStatistic::Projection}}, "statistic");
            if (o.contains("placement"))
                c.order.placement = detail::enum_from<MergePlacement>(
                    o.at("placement").get<std::string>(),
                    {{"power-weighted", MergePlacement::PowerWeighted}, {"midpoint", MergePlacement::Midpoint}}, "placement");
        }
        detail::maybe(j, "max_outer", c.max_outer);
        detail::maybe(j, "search_eps_tol", c.search_eps_tol);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Report

struct ReportFile {
    SinusoidSet estimates;
    double sigma2_hat = 0.0;
    int initial_nodes = 0;
    int outer_iterations = 0;
    int inner_iterations = 0;
    std::vector<double> cost_trace;
    std::vector<MergeEvent> merges;
    std::vector<PruneEvent> prunes;
    EstimatorConfig config;
    std::optional<std::uint64_t> seed;

    std::size_t k_hat() const { return estimates.size(); }
    bool operator==(const ReportFile&) const = default;
};

inline ReportFile make_report(const RunReport& r, const EstimatorConfig& cfg, std::optional<std::uint64_t> seed = std::nullopt) {
    return {r.estimates, r.sigma2_hat, r.initial_nodes, r.outer_iterations, r.inner_iterations, r.cost_trace,
            r.merge_events, r.prune_events, cfg, seed};
}

inline json report_to_json(const ReportFile& r) {
    json merges = json::array();
    for (const auto& m : r.merges)
        merges.push_back({{"omega_lo", m.omega_lo}, {"omega_hi", m.omega_hi}, {"crb_delta", m.crb_delta}, {"omega_merged", m.omega_merged},
                          {"alpha_re", m.alpha_merged.real()}, {"alpha_im", m.alpha_merged.imag()}, {"redundant", m.redundant}});
    json prunes = json::array();
    for (const auto& p : r.prunes)
        prunes.push_back({{"omega", p.omega}, {"alpha_re", p.alpha.real()}, {"alpha_im", p.alpha.imag()}, {"xi", p.xi}, {"threshold", p.threshold}});
    json estimates = json::array();
    for (const auto& e : r.estimates)
        estimates.push_back({{"re", e.amplitude.real()}, {"im", e.amplitude.imag()}, {"omega", e.omega}, {"normalized_freq", e.normalized_freq()}});
    return {
        {"estimates", estimates},
        {"sigma2_hat", r.sigma2_hat},
        {"k_hat", r.k_hat()},
        {"initial_nodes", r.initial_nodes},
        {"outer_iterations", r.outer_iterations},
        {"inner_iterations", r.inner_iterations},
        {"cost_trace", r.cost_trace},
        {"events", {{"merges", merges}, {"prunes", prunes}}},
        {"config", config_to_json(r.config)},
        {"seed", r.seed ? json(*r.seed) : json(nullptr)},
    };
}

inline ReportFile report_from_json(const json& j) {
    ReportFile r;
    try {
        for (const auto& e : j.at("estimates")) r.estimates.push_back({cplx(e.at("re").get<double>(), e.at("im").get<double>()), e.at("omega").get<double>()});
        if (j.at("k_hat").get<std::size_t>() != r.estimates.size()) throw Error(ErrorKind::Parse, "k_hat does not match estimates");
        r.sigma2_hat = j.at("sigma2_hat").get<double>();
        detail::maybe(j, "initial_nodes", r.initial_nodes);
        r.outer_iterations = j.at("outer_iterations").get<int>();
        detail::maybe(j, "inner_iterations", r.inner_iterations);
        r.cost_trace = j.at("cost_trace").get<std::vector<double>>();
        const auto& ev = j.at("events");
        for (const auto& m : ev.at("merges"))
            r.merges.push_back({m.at("omega_lo").get<double>(), m.at("omega_hi").get<double>(), m.at("crb_delta").get<double>(),
                                m.at("omega_merged").get<double>(), cplx(m.at("alpha_re").get<double>(), m.at("alpha_im").get<double>()),
                                m.value("redundant", false)});
        for (const auto& p : ev.at("prunes"))
            r.prunes.push_back({p.at("omega").get<double>(), cplx(p.at("alpha_re").get<double>(), p.at("alpha_im").get<double>()),
                                p.at("xi").get<double>(), p.at("threshold").get<double>()});
        r.config = config_from_json(j.at("config"));
        if (!j.at("seed").is_null()) r.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("report: ") + e.what());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Sweep results

inline json sweep_to_json(const SweepResult& s) {
    json rows = json::array();
    for (const auto& r : s.rows) {
        json values = json::object();
        for (const auto& [k, v] : r.values) values[k] = std::isfinite(v) ? json(v) : json(nullptr);
        rows.push_back({{"condition", r.condition}, {"values", values}, {"histogram", r.histogram}});
    }
    return {{"experiment", s.experiment}, {"n_samples", s.n_samples}, {"trials", s.trials}, {"base_seed", s.base_seed},
            {"config", config_to_json(s.config)}, {"notes", s.notes}, {"rows", rows}};
}

inline SweepResult sweep_from_json(const json& j) {
    SweepResult s;
    try {
        s.experiment = j.at("experiment").get<std::string>();
        s.n_samples = j.at("n_samples").get<Eigen::Index>();
        s.trials = j.at("trials").get<int>();
        s.base_seed = j.at("base_seed").get<std::uint64_t>();
        s.config = config_from_json(j.at("config"));
        s.notes = j.at("notes").get<std::vector<std::string>>();
        for (const auto& r : j.at("rows")) {
            SweepRow row{r.at("condition").get<std::string>(), {}, r.at("histogram").get<std::vector<int>>()};
            for (const auto& [k, v] : r.at("values").items())
                row.values[k] = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
            s.rows.push_back(std::move(row));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("sweep: ") + e.what());
    }
    return s;
}

/// One line per condition: condition, every value key (sorted union), then
/// hist_0.. when the rows carry histograms.
inline std::string sweep_to_csv(const SweepResult& s) {
    std::set<std::string> keys;
    std::size_t bins = 0;
    for (const auto& r : s.rows) {
        for (const auto& [k, v] : r.values) keys.insert(k);
        bins = std::max(bins, r.histogram.size());
    }
    std::string out = "condition";
    for (const auto& k : keys) out += "," + k;
    for (std::size_t b = 0; b < bins; ++b) out += ",hist_" + std::to_string(b);
    out += "\n";
    for (const auto& r : s.rows) {
        out += "\"" + r.condition + "\"";
        for (const auto& k : keys) {
            const auto it = r.values.find(k);
            out += ",";
            if (it != r.values.end() && std::isfinite(it->second)) out += format_double(it->second);
        }
        for (std::size_t b = 0; b < bins; ++b) out += "," + (b < r.histogram.size() ? std::to_string(r.histogram[b]) : std::string());
        out += "\n";
    }
    return out;
}

} // namespace mnnspec::io
