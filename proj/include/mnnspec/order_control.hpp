#pragma once

// Model-order control: CRB-based merging of nodes whose frequency gap is not
// significant, and CFAR pruning of nodes whose projected power is at noise
// level.

#include "mnnspec/core.hpp"
#include "mnnspec/mnn_optimizer.hpp"
#include "mnnspec/signal_model.hpp"
#include "mnnspec/stat_dist.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

namespace mnnspec {

/// Numerator of the per-node prune statistic; the denominator is always the
/// residual energy ||y - A alpha||^2. The two coincide for a single node.
enum class PruneStatistic {
    Projection,      ///< |a_i^H y|^2
    PartialResidual, ///< |a_i^H (y - sum_{k != i} alpha_k a_k)|^2, free of leakage from the other nodes
};

/// Where a merged node is placed between its two parents.
enum class MergePlacement {
    Midpoint,      ///< (omega_i + omega_j) / 2
    PowerWeighted, ///< weights |alpha_i|^2, |alpha_j|^2; the midpoint for equal magnitudes
};

struct OrderConfig {
    double delta_omega_min = 0.0;
    double epsilon_f = 1e-6;
    double epsilon_a = 1e-6;
    PruneStatistic statistic = PruneStatistic::PartialResidual;
    MergePlacement placement = MergePlacement::PowerWeighted;
    /// After the gap test, also merge adjacent pairs that a single sinusoid
    /// explains as well (nested F test at significance epsilon_r). Catches one
    /// tone split into two separated halves. At epsilon_f = 1e-6 the test
    /// would also swallow resolvable pairs at moderate SNR, hence its own level.
    bool redundancy_check = true;
    double epsilon_r = 1e-2;

    void validate() const {
        if (!(delta_omega_min >= 0.0)) throw Error(ErrorKind::DomainError, "delta_omega_min must be >= 0");
        if (!(epsilon_f > 0.0 && epsilon_f < 1.0)) throw Error(ErrorKind::DomainError, "epsilon_f must lie in (0, 1)");
        if (!(epsilon_a > 0.0 && epsilon_a < 1.0)) throw Error(ErrorKind::DomainError, "epsilon_a must lie in (0, 1)");
        if (!(epsilon_r > 0.0 && epsilon_r < 1.0)) throw Error(ErrorKind::DomainError, "epsilon_r must lie in (0, 1)");
    }
    bool operator==(const OrderConfig&) const = default;
};

struct CrbPair {
    Eigen::Matrix2d matrix;
    double crb_delta = 0.0; ///< variance of omega_j - omega_i
};

struct PruneReport {
    RVec xi;
    double threshold = 0.0;
    std::vector<bool> keep_mask;
    std::string warning;
};

struct MergeEvent {
    double omega_lo = 0.0;
    double omega_hi = 0.0;
    double crb_delta = 0.0;
    double omega_merged = 0.0;
    cplx alpha_merged{};
    bool redundant = false; ///< merged by the nested test, not the gap test
    bool operator==(const MergeEvent&) const = default;
};

struct PruneEvent {
    double omega = 0.0;
    cplx alpha{};
    double xi = 0.0;
    double threshold = 0.0;
    bool operator==(const PruneEvent&) const = default;
};

/// ||model - y||^2 / N
inline double estimate_noise_var(const Signal& observed, const CVec& model) {
    if (observed.size() != model.size()) throw Error(ErrorKind::InvalidDimension, "noise estimate needs equal lengths");
    return (model - observed.samples()).squaredNorm() / static_cast<double>(observed.size());
}

struct Rho {
    double rho1 = 0.0;
    cplx rho2{};
};

/// rho1 = sum n^2, rho2 = sum n^2 e^{j(w_j - w_i) n}
inline Rho rho(double omega_i, double omega_j, Eigen::Index n_samples) {
    if (n_samples < 2) throw Error(ErrorKind::InvalidDimension, "rho needs n_samples >= 2");
    Rho r;
    const double d = omega_j - omega_i;
    for (Eigen::Index n = 0; n < n_samples; ++n) {
        const double n2 = static_cast<double>(n) * static_cast<double>(n);
        r.rho1 += n2;
        r.rho2 += n2 * std::polar(1.0, d * static_cast<double>(n));
    }
    return r;
}

/// Frequency-only CRB of a two-sinusoid model.
inline CrbPair crb_pair(cplx alpha_i, cplx alpha_j, double omega_i, double omega_j, double sigma2, Eigen::Index n_samples) {
    if (!(sigma2 > 0.0)) throw Error(ErrorKind::DomainError, "crb_pair needs sigma2 > 0");
    const Rho r = rho(omega_i, omega_j, n_samples);
    const double pi = std::norm(alpha_i);
    const double pj = std::norm(alpha_j);
    const double cross = (std::conj(alpha_i) * alpha_j * r.rho2).real();
    const double diag = pi * pj * r.rho1 * r.rho1;
    const double det = diag - cross * cross;
    if (!(pi > 0.0) || !(pj > 0.0) || !(det > 1e-13 * diag) || !std::isfinite(det))
        throw Error(ErrorKind::SingularInformation, "two-sinusoid Fisher information is singular");
    const double scale = 0.5 * sigma2 / det;
    CrbPair out;
    out.matrix << pj * r.rho1, -cross, -cross, pi * r.rho1;
    out.matrix *= scale;
    out.crb_delta = scale * ((pi + pj) * r.rho1 + 2.0 * cross);
    return out;
}

/// Merge when Pr(delta <= delta_min) > eps_f under delta ~ N(gap, crb_delta).
/// eps_f of 0 or 1 act as the limiting "always" and "never".
inline bool merge_test(double omega_lo, double omega_hi, double crb_delta, const OrderConfig& cfg) {
    if (cfg.epsilon_f <= 0.0) return true;
    if (cfg.epsilon_f >= 1.0) return false;
    const double gap = omega_hi - omega_lo;
    if (std::isinf(crb_delta)) return true;
    return gap < cfg.delta_omega_min - std::sqrt(crb_delta) * stat::std_normal_inv_cdf(cfg.epsilon_f);
}

namespace detail {

// Lower bound on the plug-in noise variance so an exact fit still yields a
// usable (and very tight) CRB.
inline double noise_var_floor(const Signal& observed) {
    return 1e-12 * observed.energy() / static_cast<double>(observed.size());
}

struct Node {
    double omega;     // as carried by the state (may be unwrapped)
    double wrapped;   // in [0, 2pi)
    cplx alpha;
};

inline double pair_crb_delta(const Node& lo, const Node& hi, double gap, double sigma2, Eigen::Index n_samples) {
    try {
        return crb_pair(lo.alpha, hi.alpha, 0.0, gap, sigma2, n_samples).crb_delta;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::SingularInformation) throw;
        return std::numeric_limits<double>::infinity();
    }
}

inline Node merged(const Node& lo, const Node& hi, double gap, MergePlacement placement) {
    double frac = 0.5;
    const double pl = std::norm(lo.alpha);
    const double ph = std::norm(hi.alpha);
    if (placement == MergePlacement::PowerWeighted && pl + ph > 0.0) frac = ph / (pl + ph);
    // a gap near 2pi is a short step the other way round the circle
    const double step = gap > kPi ? gap - kTwoPi : gap;
    Node out = lo;
    out.omega = lo.omega + frac * step;
    out.wrapped = wrap_angle(lo.wrapped + frac * step);
    out.alpha = lo.alpha + hi.alpha;
    return out;
}

// Residual energy left when `r` is fitted by LS on the given atoms.
inline double ls_residual_energy(const CMat& atoms, const CVec& r) {
    Eigen::ColPivHouseholderQR<CMat> qr(atoms);
    return (r - atoms * qr.solve(r)).squaredNorm();
}

// Best single-atom fit to r over [a, b]: grid then golden section on
// |a(w)^H r|^2. Returns the residual energy.
inline double single_tone_residual(const CVec& r, double a, double b, Eigen::Index n_samples) {
    auto power = [&](double w) { return std::norm(atom(w, n_samples).dot(r)); };
    constexpr int grid = 16;
    const double step = (b - a) / grid;
    int best = 0;
    double best_p = -1.0;
    for (int k = 0; k <= grid; ++k) {
        const double p = power(a + k * step);
        if (p > best_p) { best_p = p; best = k; }
    }
    double lo = a + std::max(0, best - 1) * step;
    double hi = a + std::min(grid, best + 1) * step;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double p1 = power(x1), p2 = power(x2);
    for (int it = 0; it < 40; ++it) {
        if (p1 > p2) { hi = x2; x2 = x1; p2 = p1; x1 = hi - g * (hi - lo); p1 = power(x1); }
        else { lo = x1; x1 = x2; p1 = p2; x2 = lo + g * (hi - lo); p2 = power(x2); }
    }
    best_p = std::max({best_p, p1, p2});
    return std::max(0.0, r.squaredNorm() - best_p / static_cast<double>(n_samples));
}

// Nested test of "one sinusoid" against "two" for an adjacent pair; `others`
// is y minus every other node. The pair model has one extra complex amplitude
// and one extra frequency; 4 numerator degrees of freedom are used since the
// second frequency is unidentified under the null. True means the pair is
// redundant.
inline bool pair_redundant(const Node& lo, double gap, const CVec& others, double resid_energy,
                           Eigen::Index m_nodes, double epsilon_r) {
    const Eigen::Index n = others.size();
    if (gap >= kTwoPi / static_cast<double>(n)) return false;
    CMat pair(n, 2);
    pair.col(0) = atom(lo.wrapped, n);
    pair.col(1) = atom(lo.wrapped + gap, n);
    const double c_two = ls_residual_energy(pair, others);
    const double c_one = single_tone_residual(others, lo.wrapped - 0.5 * gap, lo.wrapped + 1.5 * gap, n);
    const double d2 = std::max(1.0, 2.0 * static_cast<double>(n) - 3.0 * static_cast<double>(m_nodes));
    if (!(resid_energy > 0.0)) return false;
    const double stat = ((c_one - c_two) / 4.0) / (resid_energy / d2);
    return stat < stat::f_inv_cdf(1.0 - epsilon_r, {4.0, d2});
}

} // namespace detail

namespace detail {

// Context handed to a merge decision: the noise estimate of the state being
// swept and, for the nested test, y minus every node except the pair.
struct PairContext {
    double sigma2;
    double crb;
    const CVec* others; // null unless the sweep was asked for it
};

// One left-to-right pass over frequency-sorted nodes, then the wrap-around
// pair. A merged node can merge again with its next neighbour. `decide`
// returns whether the pair merges and sets the event's `redundant` flag.
template <class Decide>
std::pair<MnnState, std::vector<MergeEvent>> merge_sweep(const MnnState& state, const Signal& observed, MergePlacement placement,
                                                         bool need_others, Decide decide) {
    std::vector<MergeEvent> events;
    if (state.size() < 2) return {state, events};
    const Eigen::Index n_samples = observed.size();
    const double sigma2 = std::max(estimate_noise_var(observed, forward(state, n_samples)), noise_var_floor(observed));

    std::vector<Node> nodes;
    for (Eigen::Index i = 0; i < state.size(); ++i) nodes.push_back({state.omegas[i], wrap_angle(state.omegas[i]), state.alphas[i]});
    std::stable_sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a.wrapped < b.wrapped; });

    std::vector<Node> kept;
    auto try_merge = [&](const Node& lo, const Node& hi, double gap, const CVec* others, Node& out) {
        const PairContext ctx{sigma2, pair_crb_delta(lo, hi, gap, sigma2, n_samples), others};
        bool redundant = false;
        if (!decide(lo, hi, gap, ctx, redundant)) return false;
        out = merged(lo, hi, gap, placement);
        events.push_back({lo.wrapped, wrap_angle(lo.wrapped + gap), ctx.crb, out.wrapped, out.alpha, redundant});
        return true;
    };

    Node current = nodes.front();
    for (std::size_t k = 1; k < nodes.size(); ++k) {
        CVec others;
        if (need_others) {
            others = observed.samples();
            for (const auto& node : kept) others -= node.alpha * atom(node.wrapped, n_samples);
            for (std::size_t j = k + 1; j < nodes.size(); ++j) others -= nodes[j].alpha * atom(nodes[j].wrapped, n_samples);
        }
        Node combined{};
        if (try_merge(current, nodes[k], nodes[k].wrapped - current.wrapped, need_others ? &others : nullptr, combined)) current = combined;
        else {
            kept.push_back(current);
            current = nodes[k];
        }
    }
    kept.push_back(current);

    // wrap-around pair (last, first + 2pi)
    if (kept.size() >= 2) {
        const Node& last = kept.back();
        const Node& first = kept.front();
        const double gap = first.wrapped + kTwoPi - last.wrapped;
        CVec others;
        if (need_others) {
            others = observed.samples();
            for (std::size_t k = 1; k + 1 < kept.size(); ++k) others -= kept[k].alpha * atom(kept[k].wrapped, n_samples);
        }
        Node combined{};
        if (try_merge(last, first, gap, need_others ? &others : nullptr, combined)) {
            kept.pop_back();
            kept.front() = combined;
            std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.wrapped < b.wrapped; });
        }
    }

    if (events.empty()) return {state, events};
    RVec omegas(static_cast<Eigen::Index>(kept.size()));
    CVec alphas(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) {
        omegas[static_cast<Eigen::Index>(k)] = kept[k].omega;
        alphas[static_cast<Eigen::Index>(k)] = kept[k].alpha;
    }
    return {MnnState(std::move(omegas), std::move(alphas)), events};
}

} // namespace detail

/// CRB gap test over adjacent pairs (see merge_sweep for the pass order).
inline std::pair<MnnState, std::vector<MergeEvent>> apply_merges(const MnnState& state, const Signal& observed, const OrderConfig& cfg) {
    return detail::merge_sweep(state, observed, cfg.placement, false,
                               [&](const detail::Node&, const detail::Node&, double gap, const detail::PairContext& ctx, bool&) {
                                   return merge_test(0.0, gap, ctx.crb, cfg);
                               });
}

/// Merges adjacent pairs that one sinusoid explains as well as two, by the
/// nested F test at epsilon_r. Run after apply_merges; not part of the gap
/// test, so a pair the gap test keeps can still go here.
inline std::pair<MnnState, std::vector<MergeEvent>> apply_redundancy_merges(const MnnState& state, const Signal& observed,
                                                                            const OrderConfig& cfg) {
    const Eigen::Index m = state.size();
    return detail::merge_sweep(state, observed, cfg.placement, true,
                               [&](const detail::Node& lo, const detail::Node&, double gap, const detail::PairContext& ctx, bool& redundant) {
                                   const double energy = ctx.sigma2 * static_cast<double>(observed.size());
                                   redundant = detail::pair_redundant(lo, gap, *ctx.others, energy, m, cfg.epsilon_r);
                                   return redundant;
                               });
}

namespace detail {

// Numerators for every node; `atoms` and `resid` belong to the current state.
inline RVec prune_numerators(const CMat& atoms, const CVec& alphas, const CVec& y, const CVec& resid, PruneStatistic kind) {
    const Eigen::Index m = atoms.cols();
    const Eigen::Index n_samples = atoms.rows();
    RVec out(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        switch (kind) {
        case PruneStatistic::Projection:
            out[i] = std::norm(atoms.col(i).dot(y));
            break;
        case PruneStatistic::PartialResidual:
            out[i] = std::norm(atoms.col(i).dot(resid) + static_cast<double>(n_samples) * alphas[i]);
            break;
        }
    }
    return out;
}

} // namespace detail

/// xi_i = numerator_i / ||y - A alpha||^2 (see PruneStatistic).
inline double prune_statistic(Eigen::Index node_index, const MnnState& state, const Signal& observed,
                              PruneStatistic kind = PruneStatistic::Projection) {
    if (!state.consistent() || state.size() < 1) throw Error(ErrorKind::InvalidDimension, "prune_statistic needs M >= 1");
    if (node_index < 0 || node_index >= state.size()) throw Error(ErrorKind::InvalidDimension, "node index out of range");
    CMat atoms;
    detail::fill_atoms(state.omegas, observed.size(), atoms);
    const CVec resid = observed.samples() - atoms * state.alphas;
    const double resid_energy = resid.squaredNorm();
    if (!(resid_energy > 0.0)) throw Error(ErrorKind::DegenerateResidual, "model fits the data exactly");
    return detail::prune_numerators(atoms, state.alphas, observed.samples(), resid, kind)[node_index] / resid_energy;
}

/// Xi = N / (N - M) * F^{-1}_{2, 2(N-M)}(1 - eps_a)
inline double prune_threshold(Eigen::Index n_samples, Eigen::Index m_nodes, const OrderConfig& cfg) {
    if (m_nodes < 1 || m_nodes >= n_samples) throw Error(ErrorKind::InvalidDimension, "prune threshold needs N > M >= 1");
    if (!(cfg.epsilon_a > 0.0 && cfg.epsilon_a <= 1.0)) throw Error(ErrorKind::DomainError, "epsilon_a must lie in (0, 1]");
    if (cfg.epsilon_a >= 1.0) return 0.0;
    const double n = static_cast<double>(n_samples);
    const double dof = n - static_cast<double>(m_nodes);
    return n / dof * stat::f_inv_cdf(1.0 - cfg.epsilon_a, {2.0, 2.0 * dof, 0.0});
}

/// Scores every node once against one threshold and drops those below it.
inline std::pair<MnnState, PruneReport> apply_prunes(const MnnState& state, const Signal& observed, const OrderConfig& cfg,
                                                     std::vector<PruneEvent>* events = nullptr) {
    PruneReport report;
    const Eigen::Index m = state.size();
    if (m == 0) return {state, report};
    const Eigen::Index n_samples = observed.size();

    Eigen::Index m_eff = m;
    if (m >= n_samples) {
        m_eff = n_samples - 1;
        report.warning = "M >= N: threshold computed with M clamped to N - 1";
    }
    if (m_eff < 1) {
        report.warning = "N = 1: pruning is undefined, all nodes kept";
        report.xi = RVec::Constant(m, std::numeric_limits<double>::infinity());
        report.keep_mask.assign(static_cast<std::size_t>(m), true);
        return {state, report};
    }
    report.threshold = prune_threshold(n_samples, m_eff, cfg);

    CMat atoms;
    detail::fill_atoms(state.omegas, n_samples, atoms);
    const CVec resid = observed.samples() - atoms * state.alphas;
    const double resid_energy = resid.squaredNorm();
    if (resid_energy > 0.0) {
        report.xi = detail::prune_numerators(atoms, state.alphas, observed.samples(), resid, cfg.statistic) / resid_energy;
    } else {
        report.xi = RVec::Constant(m, std::numeric_limits<double>::infinity()); // exact fit keeps every node
    }

    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < m; ++i) {
        const bool k = report.xi[i] >= report.threshold;
        report.keep_mask.push_back(k);
        if (k) keep.push_back(i);
        else if (events) events->push_back({wrap_angle(state.omegas[i]), state.alphas[i], report.xi[i], report.threshold});
    }
    if (static_cast<Eigen::Index>(keep.size()) == m) return {state, report};

    RVec omegas(static_cast<Eigen::Index>(keep.size()));
    CVec alphas(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        omegas[static_cast<Eigen::Index>(k)] = state.omegas[keep[k]];
        alphas[static_cast<Eigen::Index>(k)] = state.alphas[keep[k]];
    }
    return {MnnState(std::move(omegas), std::move(alphas)), report};
}

/// Pr(xi >= Xi) for a node on a tone with |alpha|^2 / sigma^2 = snr_linear;
/// (N - M)/N xi is noncentral F(2, 2(N - M)) with noncentrality 2 N snr.
inline double detection_prob(double snr_linear, Eigen::Index n_samples, Eigen::Index m_nodes, const OrderConfig& cfg) {
    if (!(snr_linear >= 0.0)) throw Error(ErrorKind::DomainError, "snr must be >= 0");
    const double xi_threshold = prune_threshold(n_samples, m_nodes, cfg);
    const double n = static_cast<double>(n_samples);
    const double dof = n - static_cast<double>(m_nodes);
    return stat::noncentral_f_sf(dof / n * xi_threshold, {2.0, 2.0 * dof, 2.0 * n * snr_linear});
}

} // namespace mnnspec
