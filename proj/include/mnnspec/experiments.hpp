#pragma once

// Monte Carlo harness: MSE against the Cramer-Rao bound, merge and prune ROC
// curves, model-order counts, convergence traces and the two-cluster case.
// Trial i of a sweep always uses seed base_seed + i; per-trial outcomes are
// stored by index and reduced in index order.

#include "mnnspec/core.hpp"
#include "mnnspec/fft_init.hpp"
#include "mnnspec/mnn_optimizer.hpp"
#include "mnnspec/order_control.hpp"
#include "mnnspec/pipeline.hpp"
#include "mnnspec/signal_model.hpp"
#include "mnnspec/stat_dist.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <string>

namespace mnnspec {

struct TrialSpec {
    SinusoidSet truth;
    Eigen::Index n_samples = 32;
    double snr_db = 10.0;
    int trials = 200;
    std::uint64_t base_seed = 1;
    bool random_phase = true; ///< redraw every amplitude phase per trial, magnitudes kept
    EstimatorConfig estimator;

    void validate() const {
        if (trials < 1) throw Error(ErrorKind::DomainError, "trials must be >= 1");
        if (n_samples < 2) throw Error(ErrorKind::InvalidDimension, "n_samples must be >= 2");
    }
    std::uint64_t seed(int trial) const { return base_seed + static_cast<std::uint64_t>(trial); }
};

/// One condition of a sweep (an SNR, a threshold, a K).
struct SweepRow {
    std::string condition;
    std::map<std::string, double> values;
    std::vector<int> histogram; ///< order sweeps only
};

struct SweepResult {
    std::string experiment;
    Eigen::Index n_samples = 0;
    int trials = 0;
    std::uint64_t base_seed = 0;
    EstimatorConfig config;
    std::vector<std::string> notes;
    std::vector<SweepRow> rows;
};

// ---------------------------------------------------------------------------
// Bounds and matching

/// Fisher information (2 / sigma^2) Re[D^H D] for K sinusoids, parameters
/// ordered (Re a_1, Im a_1, w_1, Re a_2, ...).
inline RMat general_fim(const SinusoidSet& truth, Eigen::Index n_samples, double sigma2) {
    if (!(sigma2 > 0.0)) throw Error(ErrorKind::DomainError, "general_crb needs sigma2 > 0");
    if (truth.empty()) throw Error(ErrorKind::InvalidDimension, "general_crb needs at least one sinusoid");
    if (n_samples < 2) throw Error(ErrorKind::InvalidDimension, "general_crb needs n_samples >= 2");
    const auto k = static_cast<Eigen::Index>(truth.size());
    CMat d(n_samples, 3 * k);
    const cplx j(0.0, 1.0);
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto& s = truth[static_cast<std::size_t>(i)];
        const CVec a = atom(s.omega, n_samples);
        d.col(3 * i) = a;
        d.col(3 * i + 1) = j * a;
        for (Eigen::Index n = 0; n < n_samples; ++n) d(n, 3 * i + 2) = j * static_cast<double>(n) * s.amplitude * a[n];
    }
    return (2.0 / sigma2) * (d.adjoint() * d).real();
}

/// Diagonal of the inverse of general_fim.
inline RVec general_crb(const SinusoidSet& truth, Eigen::Index n_samples, double sigma2) {
    const RMat fim = general_fim(truth, n_samples, sigma2);
    const Eigen::SelfAdjointEigenSolver<RMat> eig(fim);
    const RVec& ev = eig.eigenvalues();
    if (!(ev.minCoeff() > 1e-12 * ev.maxCoeff()))
        throw Error(ErrorKind::SingularInformation, "Fisher information is singular");
    const RMat inv = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    return inv.diagonal();
}

/// Circular distance between two frequencies.
inline double freq_distance(double a, double b) {
    const double d = std::abs(wrap_angle(a) - wrap_angle(b));
    return std::min(d, kTwoPi - d);
}

/// Greedy nearest-frequency pairing: repeatedly take the closest unpaired
/// (truth, estimate) pair. Returns for each truth index the matched estimate
/// index, or -1.
inline std::vector<int> match_components(const SinusoidSet& truth, const SinusoidSet& estimates) {
    struct Pair {
        double dist;
        std::size_t t, e;
    };
    std::vector<Pair> pairs;
    for (std::size_t t = 0; t < truth.size(); ++t)
        for (std::size_t e = 0; e < estimates.size(); ++e) pairs.push_back({freq_distance(truth[t].omega, estimates[e].omega), t, e});
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.dist < b.dist; });
    std::vector<int> out(truth.size(), -1);
    std::vector<bool> used(estimates.size(), false);
    for (const auto& p : pairs) {
        if (out[p.t] >= 0 || used[p.e]) continue;
        out[p.t] = static_cast<int>(p.e);
        used[p.e] = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trial plumbing

struct TrialData {
    SinusoidSet truth; ///< with this trial's phases
    double sigma2 = 0.0;
    Signal signal;
};

namespace detail {

inline double uniform_phase(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, kTwoPi)(rng); }

// Phases come from their own stream so the noise stream matches synthesize(seed).
inline std::mt19937_64 phase_stream(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x9e3779b9u};
    return std::mt19937_64(seq);
}

inline double roc_area(std::vector<std::pair<double, double>> far_pd) {
    far_pd.emplace_back(0.0, 0.0);
    far_pd.emplace_back(1.0, 1.0);
    std::sort(far_pd.begin(), far_pd.end());
    double area = 0.0;
    for (std::size_t i = 1; i < far_pd.size(); ++i)
        area += (far_pd[i].first - far_pd[i - 1].first) * 0.5 * (far_pd[i].second + far_pd[i - 1].second);
    return area;
}

inline std::string fmt(const char* key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s=%g", key, v);
    return buf;
}

// The two strongest adjacent FFT bins (peak and stronger neighbour) with LS amplitudes.
inline MnnState two_node_init(const Signal& y, const InitConfig& cfg) {
    const RVec mag = zero_padded_fft(y, cfg).cwiseAbs();
    Eigen::Index peak = 0;
    mag.maxCoeff(&peak);
    InitConfig one = cfg;
    one.neighbors = NeighborRule::Stronger;
    const CandidateSet cand = augment_adjacent({static_cast<std::size_t>(peak)}, mag, one);
    return MnnState(cand.as_vector(), ls_amplitudes(cand, y));
}

} // namespace detail

/// Signal for one trial: truth (phases redrawn if requested) plus noise at
/// the requested SNR relative to the noiseless signal's power.
inline TrialData make_trial(const TrialSpec& spec, int trial) {
    TrialData out;
    out.truth = spec.truth;
    const std::uint64_t seed = spec.seed(trial);
    if (spec.random_phase) {
        auto rng = detail::phase_stream(seed);
        for (auto& s : out.truth) s.amplitude = std::polar(std::abs(s.amplitude), detail::uniform_phase(rng));
    }
    out.sigma2 = noise_var_for_snr(clean_signal(out.truth, spec.n_samples), spec.snr_db);
    out.signal = synthesize(out.truth, spec.n_samples, {out.sigma2, seed});
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps

/// Normalized MSE per SNR: frequency error / (2 pi)^2 and amplitude error /
/// |alpha|^2, over correct-order trials only, against the mean CRB of the
/// trials' parameters. Also reports the plain periodogram's frequency MSE
/// over the trials where it finds K peaks.
inline SweepResult mc_mse(const TrialSpec& spec, const std::vector<double>& snr_grid) {
    spec.validate();
    SweepResult res{"mse", spec.n_samples, spec.trials, spec.base_seed, spec.estimator, {}, {}};
    res.notes.push_back("frequency MSE normalized by (2pi)^2, amplitude MSE by |alpha|^2");
    res.notes.push_back(spec.random_phase ? "amplitude phases uniform per trial, magnitudes fixed" : "amplitudes fixed");
    res.notes.push_back("trials with a wrong model order are excluded from the MSE and counted");
    const std::size_t k = spec.truth.size();

    for (double snr : snr_grid) {
        TrialSpec s = spec;
        s.snr_db = snr;
        struct Outcome {
            bool correct = false, fft_correct = false;
            double f_err = 0, a_err = 0, f_crb = 0, a_crb = 0, fft_err = 0;
        };
        std::vector<Outcome> out(static_cast<std::size_t>(spec.trials));
        for (int t = 0; t < spec.trials; ++t) {
            const TrialData d = make_trial(s, t);
            Outcome& o = out[static_cast<std::size_t>(t)];
            const RVec crb = general_crb(d.truth, spec.n_samples, d.sigma2);
            for (std::size_t c = 0; c < k; ++c) {
                const double p = std::norm(d.truth[c].amplitude);
                o.f_crb += crb[static_cast<Eigen::Index>(3 * c + 2)] / (kTwoPi * kTwoPi);
                o.a_crb += (crb[static_cast<Eigen::Index>(3 * c)] + crb[static_cast<Eigen::Index>(3 * c + 1)]) / p;
            }
            const RunReport r = estimate_spectrum(d.signal, spec.estimator);
            if (r.k_hat() == k) {
                o.correct = true;
                const auto m = match_components(d.truth, r.estimates);
                for (std::size_t c = 0; c < k; ++c) {
                    const auto& e = r.estimates[static_cast<std::size_t>(m[c])];
                    o.f_err += std::pow(freq_distance(e.omega, d.truth[c].omega) / kTwoPi, 2);
                    o.a_err += std::norm(e.amplitude - d.truth[c].amplitude) / std::norm(d.truth[c].amplitude);
                }
            }
            const SinusoidSet fft = periodogram_estimate(d.signal, spec.estimator.init);
            if (fft.size() == k) {
                o.fft_correct = true;
                const auto m = match_components(d.truth, fft);
                for (std::size_t c = 0; c < k; ++c)
                    o.fft_err += std::pow(freq_distance(fft[static_cast<std::size_t>(m[c])].omega, d.truth[c].omega) / kTwoPi, 2);
            }
        }
        double f = 0, a = 0, fc = 0, ac = 0, ff = 0;
        int correct = 0, fft_correct = 0;
        for (const auto& o : out) {
            fc += o.f_crb;
            ac += o.a_crb;
            if (o.correct) {
                ++correct;
                f += o.f_err;
                a += o.a_err;
            }
            if (o.fft_correct) {
                ++fft_correct;
                ff += o.fft_err;
            }
        }
        const double kd = static_cast<double>(k);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        SweepRow row{detail::fmt("snr_db", snr), {}, {}};
        row.values["snr_db"] = snr;
        row.values["correct_order"] = correct;
        row.values["order_errors"] = spec.trials - correct;
        row.values["mse_freq"] = correct ? f / (kd * correct) : nan;
        row.values["mse_amp"] = correct ? a / (kd * correct) : nan;
        row.values["crb_freq"] = fc / (kd * spec.trials);
        row.values["crb_amp"] = ac / (kd * spec.trials);
        row.values["fft_trials"] = fft_correct;
        row.values["fft_mse_freq"] = fft_correct ? ff / (kd * fft_correct) : nan;
        res.rows.push_back(std::move(row));
    }
    return res;
}

/// Trained two-node networks for the merge ROC; `second_tone` adds the tone at
/// 2 pi (0.5 + 1/(16 N)) with the same power.
inline std::vector<std::pair<MnnState, Signal>> merge_roc_networks(const TrialSpec& spec, bool second_tone) {
    TrialSpec s = spec;
    s.truth = {{cplx(1.0, 0.0), kTwoPi * 0.5}};
    if (second_tone) s.truth.push_back({cplx(1.0, 0.0), kTwoPi * (0.5 + 1.0 / (16.0 * static_cast<double>(spec.n_samples)))});
    std::vector<std::pair<MnnState, Signal>> out;
    for (int t = 0; t < spec.trials; ++t) {
        const TrialData d = make_trial(s, t);
        const Signal y = detail::normalize(d.signal).signal;
        auto [trained, trace] = train_inner(y, detail::two_node_init(y, spec.estimator.init), spec.estimator.train);
        out.emplace_back(std::move(trained), y);
    }
    return out;
}

/// Merge ROC: PD = fraction of two-tone trials keeping both nodes, FAR =
/// fraction of one-tone trials keeping both nodes, for each eps_f. The merge
/// bound is -Phi^{-1}(eps_f) sqrt(crb_delta), so small eps_f merges more and
/// both rates rise towards 1 as eps_f approaches 0.5 and above.
inline SweepResult mc_roc_merge(const TrialSpec& spec, const std::vector<double>& epsilon_f_grid) {
    spec.validate();
    SweepResult res{"roc-merge", spec.n_samples, spec.trials, spec.base_seed, spec.estimator, {}, {}};
    res.notes.push_back("two nodes from the FFT peak and its stronger neighbour, trained once, merge test swept over eps_f");
    res.notes.push_back("snr_db=" + std::to_string(spec.snr_db));
    const auto two = merge_roc_networks(spec, true);
    const auto one = merge_roc_networks(spec, false);
    auto kept = [](const auto& nets, const OrderConfig& cfg) {
        int n = 0;
        for (const auto& [state, y] : nets) n += apply_merges(state, y, cfg).second.empty() ? 1 : 0;
        return n;
    };
    std::vector<std::pair<double, double>> curve;
    for (double eps : epsilon_f_grid) {
        OrderConfig cfg = spec.estimator.order;
        cfg.epsilon_f = eps;
        const int d = kept(two, cfg);
        const int f = kept(one, cfg);
        SweepRow row{detail::fmt("epsilon_f", eps), {}, {}};
        row.values["epsilon_f"] = eps;
        row.values["kept_two_tone"] = d;
        row.values["kept_one_tone"] = f;
        row.values["pd"] = static_cast<double>(d) / spec.trials;
        row.values["far"] = static_cast<double>(f) / spec.trials;
        curve.emplace_back(row.values["far"], row.values["pd"]);
        res.rows.push_back(std::move(row));
    }
    for (auto& row : res.rows) row.values["roc_area"] = detail::roc_area(curve);
    return res;
}

enum class PruneScenario { OneNode, TwoNodeWeak };

/// Prune ROC with nodes held at the nominal frequencies and LS amplitudes, the
/// setting in which the null F law and the noncentral-F detection law hold.
/// OneNode: tone at 0.5 vs pure noise. TwoNodeWeak: |alpha| = 1, 0.1 at 0.5,
/// 0.8 vs the strong tone alone; only the weak node's decision counts. SNR is
/// |alpha_1|^2 / sigma^2 in both.
inline SweepResult mc_roc_prune(const TrialSpec& spec, const std::vector<double>& epsilon_a_grid, PruneScenario scenario) {
    spec.validate();
    const bool one_node = scenario == PruneScenario::OneNode;
    SweepResult res{one_node ? "roc-prune-one-node" : "roc-prune-two-node", spec.n_samples, spec.trials, spec.base_seed, spec.estimator, {}, {}};
    res.notes.push_back("nodes fixed at nominal frequencies with least-squares amplitudes");
    res.notes.push_back("snr_db=" + std::to_string(spec.snr_db));
    const Eigen::Index n = spec.n_samples;
    const double sigma2 = std::pow(10.0, -spec.snr_db / 10.0);
    const double weak = 0.1;
    RVec omegas = one_node ? RVec::Constant(1, kTwoPi * 0.5) : RVec((RVec(2) << kTwoPi * 0.5, kTwoPi * 0.8).finished());
    const Eigen::Index tested = omegas.size() - 1;

    // xi of the tested node with and without its tone
    std::vector<double> xi_on(static_cast<std::size_t>(spec.trials)), xi_off(xi_on.size());
    for (int t = 0; t < spec.trials; ++t) {
        auto rng = detail::phase_stream(spec.seed(t));
        SinusoidSet with{{std::polar(1.0, detail::uniform_phase(rng)), kTwoPi * 0.5}};
        SinusoidSet without;
        if (!one_node) {
            without = with;
            with.push_back({std::polar(weak, detail::uniform_phase(rng)), kTwoPi * 0.8});
        }
        for (int pass = 0; pass < 2; ++pass) {
            const SinusoidSet& truth = pass == 0 ? with : without;
            const Signal y = truth.empty() ? synthesize({{cplx{}, 0.0}}, n, {sigma2, spec.seed(t)})
                                           : synthesize(truth, n, {sigma2, spec.seed(t)});
            const MnnState st(omegas, ls_amplitudes(omegas, y));
            (pass == 0 ? xi_on : xi_off)[static_cast<std::size_t>(t)] =
                prune_statistic(tested, st, y, spec.estimator.order.statistic);
        }
    }
    const double snr_tested = (one_node ? 1.0 : weak * weak) / sigma2;
    std::vector<std::pair<double, double>> curve, theory;
    for (double eps : epsilon_a_grid) {
        OrderConfig cfg = spec.estimator.order;
        cfg.epsilon_a = eps;
        const double thr = prune_threshold(n, omegas.size(), cfg);
        const auto d = std::count_if(xi_on.begin(), xi_on.end(), [&](double x) { return x >= thr; });
        const auto f = std::count_if(xi_off.begin(), xi_off.end(), [&](double x) { return x >= thr; });
        SweepRow row{detail::fmt("epsilon_a", eps), {}, {}};
        row.values["epsilon_a"] = eps;
        row.values["threshold"] = thr;
        row.values["detections"] = static_cast<double>(d);
        row.values["false_alarms"] = static_cast<double>(f);
        row.values["pd"] = static_cast<double>(d) / spec.trials;
        row.values["far"] = static_cast<double>(f) / spec.trials;
        row.values["pd_theory"] = detection_prob(snr_tested, n, omegas.size(), cfg);
        row.values["far_theory"] = eps;
        curve.emplace_back(row.values["far"], row.values["pd"]);
        theory.emplace_back(eps, row.values["pd_theory"]);
        res.rows.push_back(std::move(row));
    }
    for (auto& row : res.rows) {
        row.values["roc_area"] = detail::roc_area(curve);
        row.values["roc_area_theory"] = detail::roc_area(theory);
    }
    return res;
}

/// xi of one node fixed at normalized 0.5 (LS amplitude) on pure unit-variance
/// noise, trial t seeded base_seed + t.
inline std::vector<double> prune_null_xi(Eigen::Index n_samples, int trials, std::uint64_t base_seed, PruneStatistic kind) {
    const RVec omegas = RVec::Constant(1, kTwoPi * 0.5);
    std::vector<double> xi;
    for (int t = 0; t < trials; ++t) {
        const Signal y = synthesize({{cplx{}, 0.0}}, n_samples, {1.0, base_seed + static_cast<std::uint64_t>(t)});
        xi.push_back(prune_statistic(0, MnnState(omegas, ls_amplitudes(omegas, y)), y, kind));
    }
    return xi;
}

/// Null calibration of the prune test: empirical Pr(xi >= Xi) at eps_a and a
/// KS test of (N - M)/N xi against F(2, 2(N - M)), M = 1.
inline SweepResult mc_prune_calibration(const TrialSpec& spec, double epsilon_a) {
    spec.validate();
    SweepResult res{"prune-calibration", spec.n_samples, spec.trials, spec.base_seed, spec.estimator, {}, {}};
    res.notes.push_back("pure noise, one node fixed at normalized 0.5");
    const Eigen::Index n = spec.n_samples;
    const auto xi = prune_null_xi(n, spec.trials, spec.base_seed, spec.estimator.order.statistic);
    OrderConfig cfg = spec.estimator.order;
    cfg.epsilon_a = epsilon_a;
    const double thr = prune_threshold(n, 1, cfg);
    const auto kept = std::count_if(xi.begin(), xi.end(), [&](double x) { return x >= thr; });
    const double scale = static_cast<double>(n - 1) / static_cast<double>(n);
    std::vector<double> scaled;
    for (double x : xi) scaled.push_back(scale * x);
    const stat::FParams law{2.0, 2.0 * static_cast<double>(n - 1), 0.0};
    const auto ks = stat::ks_test(scaled, [&](double x) { return stat::f_cdf(x, law); });
    const double p = epsilon_a;
    SweepRow row{detail::fmt("epsilon_a", epsilon_a), {}, {}};
    row.values["epsilon_a"] = epsilon_a;
    row.values["threshold"] = thr;
    row.values["false_alarms"] = static_cast<double>(kept);
    row.values["far"] = static_cast<double>(kept) / spec.trials;
    row.values["far_3sigma"] = 3.0 * std::sqrt(p * (1.0 - p) / spec.trials);
    row.values["ks_statistic"] = ks.statistic;
    row.values["ks_p_value"] = ks.p_value;
    res.rows.push_back(std::move(row));
    return res;
}

/// Smallest gap g with g = multiple * sqrt(crb_delta(g)) for the
/// frequency-only pair CRB: log-spaced scan for the first sign change of
/// g - multiple * sqrt(crb_delta(g)), then bisection.
inline double crb_separation(cplx alpha_i, cplx alpha_j, double sigma2, Eigen::Index n_samples, double multiple) {
    auto h = [&](double g) {
        try {
            return g - multiple * std::sqrt(crb_pair(alpha_i, alpha_j, 0.0, g, sigma2, n_samples).crb_delta);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::SingularInformation) throw;
            return -std::numeric_limits<double>::infinity();
        }
    };
    constexpr int steps = 600;
    const double g_min = 1e-7, g_max = kPi;
    double lo = g_min;
    for (int k = 1; k <= steps; ++k) {
        const double g = g_min * std::pow(g_max / g_min, static_cast<double>(k) / steps);
        if (h(g) >= 0.0) {
            double hi = g;
            for (int it = 0; it < 100 && hi - lo > 1e-15 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                (h(mid) >= 0.0 ? hi : lo) = mid;
            }
            return hi;
        }
        lo = g;
    }
    throw Error(ErrorKind::DomainError, "no separation reaches the requested multiple of the pair CRB");
}

/// Merge behaviour on two scenarios at spec.snr_db (SNR = |alpha|^2 / sigma^2
/// per tone, unit magnitudes, uniform phases):
///  - one-tone: a tone at a uniform random frequency, two-node start from the
///    FFT peak and its stronger neighbour, full estimator; histogram of K_hat.
///  - separated-pair: two tones `multiple` sqrt(crb_delta) apart (truth
///    values), nodes started at the truth and trained; counts pairs the gap
///    test keeps, and pairs the full estimator returns as two.
inline SweepResult mc_merge_behavior(const TrialSpec& spec, double multiple = 10.0) {
    spec.validate();
    SweepResult res{"merge-behavior", spec.n_samples, spec.trials, spec.base_seed, spec.estimator, {}, {}};
    res.notes.push_back("snr_db=" + std::to_string(spec.snr_db) + " per tone");
    res.notes.push_back("separated-pair gap = " + detail::fmt("multiple", multiple) + " x sqrt(crb_delta) at the true amplitudes");
    const Eigen::Index n = spec.n_samples;
    const double sigma2 = std::pow(10.0, -spec.snr_db / 10.0);

    SweepRow one{"one-tone", {}, std::vector<int>(4, 0)};
    SweepRow pair{"separated-pair", {}, {}};
    int kept_gap = 0;
    int kept_full = 0;
    for (int t = 0; t < spec.trials; ++t) {
        auto rng = detail::phase_stream(spec.seed(t));
        const double f = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const SinusoidSet tone{{std::polar(1.0, detail::uniform_phase(rng)), kTwoPi * f}};
        const Signal y1 = synthesize(tone, n, {sigma2, spec.seed(t)});
        const MnnState start = detail::two_node_init(y1, spec.estimator.init);
        const auto k1 = estimate_with_fixed_order(y1, start.omegas, spec.estimator).k_hat();
        ++one.histogram[std::min<std::size_t>(k1, 3)];

        const cplx a1 = std::polar(1.0, detail::uniform_phase(rng));
        const cplx a2 = std::polar(1.0, detail::uniform_phase(rng));
        const double w0 = kTwoPi * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const double gap = crb_separation(a1, a2, sigma2, n, multiple);
        const RVec w{{w0, w0 + gap}};
        const Signal y2 = synthesize({{a1, w[0]}, {a2, w[1]}}, n, {sigma2, spec.seed(t)});
        const MnnState trained = train_inner(y2, MnnState(w, ls_amplitudes(w, y2)), spec.estimator.train).first;
        kept_gap += apply_merges(trained, y2, spec.estimator.order).second.empty() ? 1 : 0;
        kept_full += estimate_with_fixed_order(y2, w, spec.estimator).k_hat() == 2 ? 1 : 0;
    }
    one.values["k_hat_1"] = one.histogram[1];
    one.values["fraction_k_hat_1"] = static_cast<double>(one.histogram[1]) / spec.trials;
    pair.values["kept_by_gap_test"] = kept_gap;
    pair.values["fraction_kept_by_gap_test"] = static_cast<double>(kept_gap) / spec.trials;
    pair.values["kept_by_estimator"] = kept_full;
    pair.values["fraction_kept_by_estimator"] = static_cast<double>(kept_full) / spec.trials;
    res.rows.push_back(std::move(one));
    res.rows.push_back(std::move(pair));
    return res;
}

/// Frequencies drawn uniformly on [0, 1) by rejection until every circular
/// gap is at least min_sep (normalized).
inline std::vector<double> random_separated_freqs(int k, double min_sep, std::mt19937_64& rng) {
    if (k < 0 || min_sep * k >= 1.0) throw Error(ErrorKind::DomainError, "cannot place that many separated frequencies");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
        std::vector<double> f;
        for (int attempt = 0; attempt < 1000 && static_cast<int>(f.size()) < k; ++attempt) {
            const double c = u(rng);
            bool ok = true;
            for (double v : f) {
                const double d = std::abs(c - v);
                if (std::min(d, 1.0 - d) < min_sep) ok = false;
            }
            if (ok) f.push_back(c);
        }
        if (static_cast<int>(f.size()) == k) return f;
    }
}

/// Order histogram for K = 1..k_max: random frequencies at least 4/N apart,
/// unit magnitudes, uniform phases. Histogram bins are K_hat = 0..k_max, the
/// last one collecting everything above.
inline SweepResult mc_order(const TrialSpec& spec, int k_max = 5) {
    spec.validate();
    SweepResult res{"order", spec.n_samples, spec.trials, spec.base_seed, spec.estimator, {}, {}};
    res.notes.push_back("frequencies uniform with circular separation >= 4/N, unit magnitudes, uniform phases");
    res.notes.push_back("snr_db=" + std::to_string(spec.snr_db));
    res.notes.push_back("histogram bins K_hat = 0.." + std::to_string(k_max) + ", last bin open-ended");
    const double min_sep = 4.0 / static_cast<double>(spec.n_samples);
    for (int k = 1; k <= k_max; ++k) {
        std::vector<int> k_hat(static_cast<std::size_t>(spec.trials));
        for (int t = 0; t < spec.trials; ++t) {
            auto rng = detail::phase_stream(spec.seed(t) * 131u + static_cast<std::uint64_t>(k));
            TrialSpec s = spec;
            s.random_phase = false;
            s.truth.clear();
            for (double f : random_separated_freqs(k, min_sep, rng))
                s.truth.push_back({std::polar(1.0, detail::uniform_phase(rng)), kTwoPi * f});
            const TrialData d = make_trial(s, t);
            k_hat[static_cast<std::size_t>(t)] = static_cast<int>(estimate_spectrum(d.signal, spec.estimator).k_hat());
        }
        SweepRow row{detail::fmt("k", k), {}, std::vector<int>(static_cast<std::size_t>(k_max + 1), 0)};
        for (int v : k_hat) ++row.histogram[static_cast<std::size_t>(std::min(v, k_max))];
        row.values["k"] = k;
        row.values["correct"] = row.histogram[static_cast<std::size_t>(k)];
        row.values["fraction_correct"] = static_cast<double>(row.histogram[static_cast<std::size_t>(k)]) / spec.trials;
        res.rows.push_back(std::move(row));
    }
    return res;
}

struct ConvergenceRun {
    double gamma_scale = 1.0; ///< multiplier on both default learning rates
    double lambda = 0.9;
    std::uint64_t seed = 0;
    CostTrace trace;
};

/// Inner-training traces from the FFT initialization of each trial signal,
/// for every (gamma scale, lambda) pair.
inline std::vector<ConvergenceRun> convergence_trace(const TrialSpec& spec, const std::vector<double>& gamma_grid,
                                                     const std::vector<double>& lambda_grid) {
    spec.validate();
    std::vector<ConvergenceRun> runs;
    for (int t = 0; t < spec.trials; ++t) {
        const TrialData d = make_trial(spec, t);
        const Signal y = detail::normalize(d.signal).signal;
        const MnnState init = initialize(y, spec.estimator.init);
        for (double g : gamma_grid) {
            for (double lam : lambda_grid) {
                TrainConfig cfg = spec.estimator.train;
                cfg.gamma_alpha = g * default_gamma_alpha(spec.n_samples);
                cfg.gamma_omega = g * default_gamma_omega(spec.n_samples);
                cfg.lambda = lam;
                runs.push_back({g, lam, spec.seed(t), train_inner(y, init, cfg).second});
            }
        }
    }
    return runs;
}

/// Per-setting summary of convergence_trace: converged count and median
/// iteration count.
inline SweepResult summarize_convergence(const TrialSpec& spec, const std::vector<ConvergenceRun>& runs) {
    SweepResult res{"converge", spec.n_samples, spec.trials, spec.base_seed, spec.estimator, {}, {}};
    res.notes.push_back("gamma_scale multiplies both default learning rates");
    std::map<std::pair<double, double>, std::vector<const ConvergenceRun*>> groups;
    for (const auto& r : runs) groups[{r.gamma_scale, r.lambda}].push_back(&r);
    for (const auto& [key, members] : groups) {
        std::vector<int> iters;
        int converged = 0;
        for (const auto* r : members) {
            iters.push_back(r->trace.iterations_run);
            converged += r->trace.converged ? 1 : 0;
        }
        std::sort(iters.begin(), iters.end());
        SweepRow row{detail::fmt("gamma_scale", key.first) + "," + detail::fmt("lambda", key.second), {}, {}};
        row.values["gamma_scale"] = key.first;
        row.values["lambda"] = key.second;
        row.values["runs"] = static_cast<double>(members.size());
        row.values["converged"] = converged;
        row.values["not_converged"] = static_cast<double>(members.size()) - converged;
        row.values["median_iterations"] = iters[iters.size() / 2];
        res.rows.push_back(std::move(row));
    }
    return res;
}

/// Median wall time per inner iteration at each N with M nodes fixed: a
/// random M-tone signal, `iterations` steps with convergence disabled,
/// `repeats` timings per N.
inline SweepResult iteration_timing(const std::vector<Eigen::Index>& n_grid, Eigen::Index m_nodes, int iterations, int repeats,
                                    std::uint64_t seed = 1) {
    SweepResult res{"timing", 0, repeats, seed, {}, {}, {}};
    res.notes.push_back("seconds per train_inner step, median over repeats");
    for (Eigen::Index n : n_grid) {
        auto rng = detail::phase_stream(seed);
        SinusoidSet truth;
        for (Eigen::Index i = 0; i < m_nodes; ++i)
            truth.push_back({std::polar(1.0, detail::uniform_phase(rng)), kTwoPi * (static_cast<double>(i) + 0.5) / static_cast<double>(m_nodes)});
        const Signal y = synthesize(truth, n, {0.1, seed});
        RVec w(m_nodes);
        for (Eigen::Index i = 0; i < m_nodes; ++i) w[i] = truth[static_cast<std::size_t>(i)].omega + 0.3 / static_cast<double>(n);
        const MnnState start(w, ls_amplitudes(w, y));
        TrainConfig cfg;
        cfg.max_iter = iterations;
        cfg.eps_tol = std::numeric_limits<double>::min();
        std::vector<double> per_step;
        for (int r = 0; r < repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto out = train_inner(y, start, cfg);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            per_step.push_back(secs / std::max(1, out.second.iterations_run));
        }
        std::sort(per_step.begin(), per_step.end());
        SweepRow row{detail::fmt("n", static_cast<double>(n)), {}, {}};
        row.values["n"] = static_cast<double>(n);
        row.values["m"] = static_cast<double>(m_nodes);
        row.values["seconds_per_iteration"] = per_step[per_step.size() / 2];
        res.rows.push_back(std::move(row));
    }
    return res;
}

/// The fixed two-cluster scenario: N = 128, five tones around 0.3 and five
/// around 0.7 (normalized), SNR 20 dB.
inline SinusoidSet cluster_truth() {
    const double n = 128.0;
    const std::vector<double> f = {0.3 - 1.8 / n, 0.3 - 0.75 / n, 0.3, 0.3 + 0.75 / n, 0.3 + 1.8 / n,
                                   0.7 - 2.0 / n, 0.7 - 0.8 / n, 0.7, 0.7 + 0.8 / n, 0.7 + 2.0 / n};
    const std::vector<double> mag = {0.8, 1.0, 1.2, 1.0, 0.8, 0.7, 0.9, 1.0, 0.9, 0.7};
    SinusoidSet out;
    for (std::size_t i = 0; i < f.size(); ++i) out.push_back({cplx(mag[i], 0.0), kTwoPi * f[i]});
    return out;
}

/// Estimator settings for the cluster case: an unpadded FFT (L = N), so each
/// cluster shows only a few peaks, and both neighbours of every peak.
inline EstimatorConfig cluster_config(EstimatorConfig base = {}) {
    base.init.l_factor = 1;
    base.init.neighbors = NeighborRule::Both;
    return base;
}

struct ClusterOutcome {
    SinusoidSet truth;
    double sigma2 = 0.0;
    RunReport report;
    std::vector<double> freq_error;    ///< per truth component, |omega_hat - omega|; empty unless K_hat == 10
    std::vector<double> freq_crb_std;  ///< per truth component, sqrt of the frequency CRB
};

inline ClusterOutcome cluster_case(std::uint64_t seed = 1, const EstimatorConfig& cfg = cluster_config()) {
    ClusterOutcome out;
    out.truth = cluster_truth();
    const Eigen::Index n = 128;
    out.sigma2 = noise_var_for_snr(clean_signal(out.truth, n), 20.0);
    const Signal y = synthesize(out.truth, n, {out.sigma2, seed});
    out.report = estimate_spectrum(y, cfg);
    const RVec crb = general_crb(out.truth, n, out.sigma2);
    for (std::size_t i = 0; i < out.truth.size(); ++i) out.freq_crb_std.push_back(std::sqrt(crb[static_cast<Eigen::Index>(3 * i + 2)]));
    if (out.report.k_hat() == out.truth.size()) {
        const auto m = match_components(out.truth, out.report.estimates);
        for (std::size_t i = 0; i < out.truth.size(); ++i)
            out.freq_error.push_back(freq_distance(out.report.estimates[static_cast<std::size_t>(m[i])].omega, out.truth[i].omega));
    }
    return out;
}

/// Cluster case over seeds base_seed .. base_seed + trials - 1.
inline SweepResult cluster_sweep(int trials, std::uint64_t base_seed, const EstimatorConfig& cfg = cluster_config()) {
    SweepResult res{"cluster", 128, trials, base_seed, cfg, {}, {}};
    res.notes.push_back("N=128, two five-tone clusters at 0.3 and 0.7, snr_db=20");
    for (int t = 0; t < trials; ++t) {
        const auto o = cluster_case(base_seed + static_cast<std::uint64_t>(t), cfg);
        SweepRow row{detail::fmt("seed", static_cast<double>(base_seed + static_cast<std::uint64_t>(t))), {}, {}};
        row.values["seed"] = static_cast<double>(base_seed + static_cast<std::uint64_t>(t));
        row.values["initial_nodes"] = o.report.initial_nodes;
        row.values["k_hat"] = static_cast<double>(o.report.k_hat());
        double worst = std::numeric_limits<double>::quiet_NaN();
        if (!o.freq_error.empty()) {
            worst = 0.0;
            for (std::size_t i = 0; i < o.freq_error.size(); ++i) worst = std::max(worst, o.freq_error[i] / o.freq_crb_std[i]);
        }
        row.values["max_error_in_crb_std"] = worst;
        res.rows.push_back(std::move(row));
    }
    return res;
}

} // namespace mnnspec
