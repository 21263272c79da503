#pragma once

// Full estimator: FFT initialization, then repeated {train, merge, fold
// redundant pairs, prune} until a fully trained pass leaves the node set
// unchanged, then frequency wrapping.

#include "mnnspec/core.hpp"
#include "mnnspec/fft_init.hpp"
#include "mnnspec/mnn_optimizer.hpp"
#include "mnnspec/order_control.hpp"

#include <algorithm>

namespace mnnspec {

struct EstimatorConfig {
    InitConfig init;
    TrainConfig train;
    OrderConfig order;
    int max_outer = 20;
    /// Tolerance for the training passes that precede a merge/prune decision.
    /// Once the order settles the survivors are trained to train.eps_tol.
    /// Fully converged surplus nodes tend to split a single tone into two
    /// statistically separable halves, so order search stops earlier. Values
    /// <= train.eps_tol disable the two-stage schedule.
    double search_eps_tol = 1e-3;

    void validate() const {
        init.validate();
        train.validate();
        order.validate();
        if (max_outer < 1) throw Error(ErrorKind::DomainError, "max_outer must be >= 1");
        if (!(search_eps_tol > 0.0)) throw Error(ErrorKind::DomainError, "search_eps_tol must be > 0");
    }
    bool operator==(const EstimatorConfig&) const = default;
};

struct RunReport {
    SinusoidSet estimates;      ///< sorted by frequency, omega in [0, 2pi)
    double sigma2_hat = 0.0;
    int initial_nodes = 0;
    int outer_iterations = 0;
    int inner_iterations = 0;
    std::vector<double> cost_trace; ///< mean residual, all inner passes concatenated
    std::vector<CostTrace> passes;
    std::vector<MergeEvent> merge_events;
    std::vector<PruneEvent> prune_events;

    std::size_t k_hat() const { return estimates.size(); }
};

/// Training blew up; `partial` holds everything recorded up to that point.
class EstimationDiverged : public Error {
public:
    EstimationDiverged(const std::string& what, RunReport partial)
        : Error(ErrorKind::NumericalDivergence, what), partial_(std::move(partial)) {}
    const RunReport& partial() const noexcept { return partial_; }

private:
    RunReport partial_;
};

namespace detail {

// The estimator works on y / s, s the strongest line amplitude seen by the
// zero-padded FFT, which makes the default learning rates independent of the
// signal's scale. Every
// test statistic is scale invariant; amplitudes and costs are mapped back.
struct Scaled {
    Signal signal;
    double scale = 1.0;
};

inline Scaled normalize(const Signal& observed) {
    InitConfig probe;
    const double s = zero_padded_fft(observed, probe).cwiseAbs().maxCoeff() / static_cast<double>(observed.size());
    if (!(s > 0.0)) return {observed, 1.0};
    return {Signal(observed.samples() / s), s};
}

inline void finish_report(RunReport& report, const MnnState& state, const Scaled& scaled) {
    const MnnState wrapped = wrap_frequencies(state);
    const double s2 = scaled.scale * scaled.scale;
    report.sigma2_hat = estimate_noise_var(scaled.signal, forward(wrapped, scaled.signal.size())) * s2;
    report.estimates.clear();
    for (Eigen::Index i = 0; i < wrapped.size(); ++i)
        report.estimates.push_back({wrapped.alphas[i] * scaled.scale, wrapped.omegas[i]});
    std::stable_sort(report.estimates.begin(), report.estimates.end(), [](const auto& a, const auto& b) { return a.omega < b.omega; });
    for (double& c : report.cost_trace) c *= s2;
    for (auto& pass : report.passes)
        for (double& c : pass.mean_cost) c *= s2;
    for (auto& ev : report.merge_events) ev.alpha_merged *= scaled.scale;
    for (auto& ev : report.prune_events) ev.alpha *= scaled.scale;
}

inline void train_pass(RunReport& report, MnnState& state, const Scaled& scaled, const TrainConfig& train) {
    try {
        auto [trained, trace] = train_inner(scaled.signal, state, train);
        state = std::move(trained);
        report.inner_iterations += trace.iterations_run;
        report.cost_trace.insert(report.cost_trace.end(), trace.mean_cost.begin(), trace.mean_cost.end());
        report.passes.push_back(std::move(trace));
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NumericalDivergence) throw;
        RunReport partial = report;
        finish_report(partial, state, scaled);
        throw EstimationDiverged(e.what(), std::move(partial));
    }
}

inline RunReport run_outer_loop(MnnState state, const Scaled& scaled, const EstimatorConfig& cfg) {
    RunReport report;
    report.initial_nodes = static_cast<int>(state.size());
    if (state.size() == 0) {
        finish_report(report, state, scaled);
        return report;
    }
    const bool two_stage = cfg.search_eps_tol > cfg.train.eps_tol;
    TrainConfig search = cfg.train;
    if (two_stage) search.eps_tol = cfg.search_eps_tol;

    // Passes train to the search tolerance while the order is moving. Once a
    // pass changes nothing, the next one trains to the full tolerance; the
    // loop ends when such a polished pass also changes nothing.
    bool polishing = !two_stage;
    bool confirmed = false;
    while (report.outer_iterations < cfg.max_outer && state.size() > 0) {
        ++report.outer_iterations;
        train_pass(report, state, scaled, polishing ? cfg.train : search);

        auto [merged, merges] = apply_merges(state, scaled.signal, cfg.order);
        report.merge_events.insert(report.merge_events.end(), merges.begin(), merges.end());
        if (cfg.order.redundancy_check) {
            auto [folded, folds] = apply_redundancy_merges(merged, scaled.signal, cfg.order);
            report.merge_events.insert(report.merge_events.end(), folds.begin(), folds.end());
            merged = std::move(folded);
        }
        auto [pruned, prune_report] = apply_prunes(merged, scaled.signal, cfg.order, &report.prune_events);

        const bool changed = pruned.size() != state.size();
        state = std::move(pruned);
        if (changed) {
            polishing = !two_stage;
        } else if (polishing) {
            confirmed = true;
            break;
        } else {
            polishing = true;
        }
    }
    // cap reached before a fully trained pass confirmed the order
    if (state.size() > 0 && !confirmed) train_pass(report, state, scaled, cfg.train);
    finish_report(report, state, scaled);
    return report;
}

} // namespace detail

inline RunReport estimate_spectrum(const Signal& observed, const EstimatorConfig& cfg) {
    cfg.validate();
    if (observed.size() < 2) throw Error(ErrorKind::InvalidDimension, "estimation needs N >= 2");
    const detail::Scaled scaled = detail::normalize(observed);
    return detail::run_outer_loop(initialize(scaled.signal, cfg.init), scaled, cfg);
}

/// Same loop, seeded with caller-supplied frequencies and LS amplitudes.
inline RunReport estimate_with_fixed_order(const Signal& observed, const RVec& omegas0, const EstimatorConfig& cfg) {
    cfg.validate();
    if (observed.size() < 2) throw Error(ErrorKind::InvalidDimension, "estimation needs N >= 2");
    const detail::Scaled scaled = detail::normalize(observed);
    if (omegas0.size() == 0) return detail::run_outer_loop(MnnState::empty(), scaled, cfg);
    return detail::run_outer_loop(MnnState(omegas0, ls_amplitudes(omegas0, scaled.signal)), scaled, cfg);
}

} // namespace mnnspec
