#pragma once

// The sinusoid network: frequencies are input-to-hidden weights, complex
// amplitudes are hidden-to-output weights, e^{jz} is the activation. Training
// is momentum gradient descent on the squared fitting residual.

#include "mnnspec/core.hpp"
#include "mnnspec/signal_model.hpp"

#include <algorithm>
#include <optional>

namespace mnnspec {

struct MnnState {
    RVec omegas;
    CVec alphas;
    RVec mom_omega;
    CVec mom_alpha;

    MnnState() = default;

    MnnState(RVec omegas_, CVec alphas_) : omegas(std::move(omegas_)), alphas(std::move(alphas_)) {
        if (omegas.size() != alphas.size())
            throw Error(ErrorKind::InvalidDimension, "omegas and alphas must have equal length");
        mom_omega = RVec::Zero(omegas.size());
        mom_alpha = CVec::Zero(alphas.size());
    }

    static MnnState empty() { return MnnState(RVec(0), CVec(0)); }

    Eigen::Index size() const { return omegas.size(); }

    void reset_momentum() {
        mom_omega = RVec::Zero(omegas.size());
        mom_alpha = CVec::Zero(alphas.size());
    }

    bool consistent() const {
        const auto m = omegas.size();
        return alphas.size() == m && mom_omega.size() == m && mom_alpha.size() == m;
    }

    SinusoidSet to_sinusoids() const {
        SinusoidSet out;
        out.reserve(static_cast<std::size_t>(size()));
        for (Eigen::Index i = 0; i < size(); ++i) out.push_back({alphas[i], omegas[i]});
        return out;
    }
};

/// Learning rates left unset resolve to 0.5/N (amplitudes) and 0.5/sum(n^2)
/// (frequencies) for the signal length being fitted.
struct TrainConfig {
    std::optional<double> gamma_alpha;
    std::optional<double> gamma_omega;
    double lambda = 0.9;
    double eps_tol = 1e-5;
    int max_iter = 20000;
    int safeguard_patience = 20;

    void validate() const {
        if (!(lambda >= 0.0 && lambda < 1.0)) throw Error(ErrorKind::DomainError, "lambda must lie in [0, 1)");
        if (!(eps_tol > 0.0)) throw Error(ErrorKind::DomainError, "eps_tol must be > 0");
        if (max_iter < 1) throw Error(ErrorKind::DomainError, "max_iter must be >= 1");
        if (safeguard_patience < 1) throw Error(ErrorKind::DomainError, "safeguard_patience must be >= 1");
        if (gamma_alpha && !(*gamma_alpha > 0.0)) throw Error(ErrorKind::DomainError, "gamma_alpha must be > 0");
        if (gamma_omega && !(*gamma_omega > 0.0)) throw Error(ErrorKind::DomainError, "gamma_omega must be > 0");
    }
    bool operator==(const TrainConfig&) const = default;
};

struct CostTrace {
    std::vector<double> mean_cost; ///< entry 0 is the starting point, then one per accepted step
    int iterations_run = 0;
    bool converged = false;
    int safeguard_trips = 0;
};

/// sum_{n<N} n^2
inline double sum_n_squared(Eigen::Index n_samples) {
    const double n = static_cast<double>(n_samples);
    return (n - 1.0) * n * (2.0 * n - 1.0) / 6.0;
}

inline double default_gamma_alpha(Eigen::Index n_samples) { return 0.5 / static_cast<double>(n_samples); }
inline double default_gamma_omega(Eigen::Index n_samples) { return 0.5 / std::max(1.0, sum_n_squared(n_samples)); }

inline TrainConfig resolve_rates(TrainConfig cfg, Eigen::Index n_samples) {
    if (!cfg.gamma_alpha) cfg.gamma_alpha = default_gamma_alpha(n_samples);
    if (!cfg.gamma_omega) cfg.gamma_omega = default_gamma_omega(n_samples);
    return cfg;
}

namespace detail {

inline void fill_atoms(const RVec& omegas, Eigen::Index n_samples, CMat& atoms) {
    atoms.resize(n_samples, omegas.size());
    for (Eigen::Index i = 0; i < omegas.size(); ++i) {
        const double w = wrap_angle(omegas[i]);
        for (Eigen::Index n = 0; n < n_samples; ++n) atoms(n, i) = std::polar(1.0, w * static_cast<double>(n));
    }
}

inline RVec sample_index(Eigen::Index n_samples) { return RVec::LinSpaced(n_samples, 0.0, static_cast<double>(n_samples - 1)); }

inline void check_observed(const MnnState& state, const Signal& observed) {
    if (!state.consistent()) throw Error(ErrorKind::InvalidDimension, "inconsistent network state");
    if (state.size() < 1) throw Error(ErrorKind::InvalidDimension, "gradients need at least one node");
    (void)observed;
}

// d C / d omega from precomputed atoms and residual y - x.
inline RVec omega_gradient(const CMat& atoms, const CVec& alphas, const CVec& y_minus_x, const RVec& n_index) {
    const CVec weighted = (n_index.cast<cplx>().array() * y_minus_x.conjugate().array()).matrix();
    const CVec proj = atoms.transpose() * weighted;
    return 2.0 * (alphas.array() * proj.array()).imag().matrix();
}

} // namespace detail

/// Network output A(omega) alpha.
inline CVec forward(const MnnState& state, Eigen::Index n_samples) {
    if (n_samples < 1) throw Error(ErrorKind::InvalidDimension, "forward needs n_samples >= 1");
    if (!state.consistent()) throw Error(ErrorKind::InvalidDimension, "inconsistent network state");
    if (state.size() == 0) return CVec::Zero(n_samples);
    CMat atoms;
    detail::fill_atoms(state.omegas, n_samples, atoms);
    return atoms * state.alphas;
}

/// ||y - model||^2
inline double cost(const Signal& observed, const CVec& model) {
    if (observed.size() != model.size()) throw Error(ErrorKind::InvalidDimension, "cost needs equal lengths");
    return (observed.samples() - model).squaredNorm();
}

/// dC/d(alpha*) = A^H (x - y)
inline CVec grad_alpha(const MnnState& state, const Signal& observed) {
    detail::check_observed(state, observed);
    CMat atoms;
    detail::fill_atoms(state.omegas, observed.size(), atoms);
    const CVec x = atoms * state.alphas;
    return atoms.adjoint() * (x - observed.samples());
}

/// dC/d(omega) = 2 Im{ alpha .* A^T [n .* (y - x)^*] }
inline RVec grad_omega(const MnnState& state, const Signal& observed) {
    detail::check_observed(state, observed);
    CMat atoms;
    detail::fill_atoms(state.omegas, observed.size(), atoms);
    const CVec x = atoms * state.alphas;
    return detail::omega_gradient(atoms, state.alphas, observed.samples() - x, detail::sample_index(observed.size()));
}

/// One momentum update: d <- lambda d + (1 - lambda) g, then w <- w - gamma d.
/// `cfg` must carry resolved learning rates.
inline MnnState momentum_step(const MnnState& state, const CVec& g_alpha, const RVec& g_omega, const TrainConfig& cfg) {
    if (!state.consistent() || g_alpha.size() != state.size() || g_omega.size() != state.size())
        throw Error(ErrorKind::InvalidDimension, "gradient dimensions do not match the state");
    if (!g_alpha.allFinite() || !g_omega.allFinite())
        throw Error(ErrorKind::NumericalDivergence, "non-finite gradient");
    if (!cfg.gamma_alpha || !cfg.gamma_omega)
        throw Error(ErrorKind::DomainError, "momentum_step needs resolved learning rates");
    const double lam = cfg.lambda;
    MnnState next = state;
    next.mom_alpha = lam * state.mom_alpha + (1.0 - lam) * g_alpha;
    next.mom_omega = lam * state.mom_omega + (1.0 - lam) * g_omega;
    next.alphas = state.alphas - *cfg.gamma_alpha * next.mom_alpha;
    next.omegas = state.omegas - *cfg.gamma_omega * next.mom_omega;
    return next;
}

/// Number of accepted steps the convergence test looks back over: the
/// momentum time constant 1 / (1 - lambda), so plain descent compares
/// consecutive iterations.
inline int convergence_window(double lambda) {
    return std::max(1, static_cast<int>(std::lround(1.0 / (1.0 - lambda))));
}

/// Inner training loop. Stops after max_iter steps or once two things hold,
/// each relative to the mean residual (floored at 1e-14 of the signal's mean
/// power) and below eps_tol:
///  - the mean residual's per-step change averaged over the last
///    convergence_window() accepted steps;
///  - the first-order decrease a plain gradient step at the default rates
///    would give, (2 gamma_alpha0 |g_alpha|^2 + gamma_omega0 |g_omega|^2) / N.
/// The second keeps small or halved rates, a slow momentum start, or
/// least-squares amplitudes that leave only the frequency gradient from
/// passing as convergence.
///
/// Safeguard: after `safeguard_patience` consecutive steps whose cost is above
/// the best seen so far, the best state is restored, both rates are halved and
/// the momentum is cleared. Plain runs of increases trip it, and so does a
/// momentum oscillation that keeps growing. With lambda == 0 any increasing
/// step is rejected outright, so the accepted costs never go up.
inline std::pair<MnnState, CostTrace> train_inner(const Signal& observed, const MnnState& init, const TrainConfig& config) {
    config.validate();
    if (!init.consistent()) throw Error(ErrorKind::InvalidDimension, "inconsistent network state");
    const Eigen::Index n_samples = observed.size();
    const double inv_n = 1.0 / static_cast<double>(n_samples);
    const CVec& y = observed.samples();

    CostTrace trace;
    MnnState state = init;
    state.reset_momentum();
    if (state.size() == 0) {
        trace.mean_cost.push_back(y.squaredNorm() * inv_n);
        trace.converged = true;
        return {std::move(state), std::move(trace)};
    }

    TrainConfig cfg = resolve_rates(config, n_samples);
    const double gamma_alpha0 = default_gamma_alpha(n_samples);
    const double gamma_omega0 = default_gamma_omega(n_samples);
    const RVec n_index = detail::sample_index(n_samples);
    const double floor = 1e-14 * y.squaredNorm() * inv_n;

    CMat atoms;
    detail::fill_atoms(state.omegas, n_samples, atoms);
    CVec resid = y - atoms * state.alphas; // y - x
    double c_prev = resid.squaredNorm() * inv_n;
    if (!std::isfinite(c_prev)) throw Error(ErrorKind::NumericalDivergence, "initial cost is not finite");
    trace.mean_cost.push_back(c_prev);

    const auto window = static_cast<std::size_t>(convergence_window(cfg.lambda));
    MnnState best = state;
    double best_cost = c_prev;
    int rising = 0;
    for (int t = 0; t < cfg.max_iter; ++t) {
        ++trace.iterations_run;
        const CVec g_alpha = -(atoms.adjoint() * resid);
        const RVec g_omega = detail::omega_gradient(atoms, state.alphas, resid, n_index);
        MnnState candidate = momentum_step(state, g_alpha, g_omega, cfg);

        CMat cand_atoms;
        detail::fill_atoms(candidate.omegas, n_samples, cand_atoms);
        CVec cand_resid = y - cand_atoms * candidate.alphas;
        const double c = cand_resid.squaredNorm() * inv_n;
        if (!std::isfinite(c)) throw Error(ErrorKind::NumericalDivergence, "cost became non-finite");

        if (cfg.lambda == 0.0 && c > c_prev) {
            *cfg.gamma_alpha *= 0.5;
            *cfg.gamma_omega *= 0.5;
            ++trace.safeguard_trips;
            continue;
        }

        state = std::move(candidate);
        atoms = std::move(cand_atoms);
        resid = std::move(cand_resid);
        trace.mean_cost.push_back(c);

        if (c < best_cost) {
            best_cost = c;
            best = state;
            rising = 0;
        } else if (++rising >= cfg.safeguard_patience) {
            state = best;
            state.reset_momentum();
            detail::fill_atoms(state.omegas, n_samples, atoms);
            resid = y - atoms * state.alphas;
            *cfg.gamma_alpha *= 0.5;
            *cfg.gamma_omega *= 0.5;
            rising = 0;
            ++trace.safeguard_trips;
            trace.mean_cost.push_back(best_cost);
            c_prev = best_cost;
            continue;
        }

        c_prev = c;
        const auto accepted = trace.mean_cost.size() - 1;
        if (accepted < window) continue;
        const double before = trace.mean_cost[accepted - window];
        const double level = cfg.eps_tol * std::max(before, floor);
        const double change = std::abs(c - before) / static_cast<double>(window);
        if (change != 0.0 && !(change < level)) continue;
        const double predicted = (2.0 * gamma_alpha0 * (atoms.adjoint() * resid).squaredNorm() +
                                  gamma_omega0 * detail::omega_gradient(atoms, state.alphas, resid, n_index).squaredNorm()) * inv_n;
        if (change == 0.0 || predicted < level) {
            trace.converged = true;
            break;
        }
    }
    return {std::move(state), std::move(trace)};
}

/// Maps every frequency into [0, 2pi); amplitudes are untouched.
inline MnnState wrap_frequencies(MnnState state) {
    for (Eigen::Index i = 0; i < state.omegas.size(); ++i) state.omegas[i] = wrap_angle(state.omegas[i]);
    return state;
}

} // namespace mnnspec
