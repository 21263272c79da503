#pragma once

// Zero-padded FFT initialization: gated peak picking, adjacent-bin
// augmentation and least-squares amplitudes. Also the plain periodogram
// estimator used as the comparison baseline.

#include "mnnspec/core.hpp"
#include "mnnspec/mnn_optimizer.hpp"
#include "mnnspec/signal_model.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mnnspec {

enum class NeighborRule {
    Stronger, ///< add whichever of k-1, k+1 has more power (ties go to k+1)
    Both,     ///< add both k-1 and k+1
};

struct InitConfig {
    int l_factor = 4;
    double peak_gate_epsilon = 1e-3;
    NeighborRule neighbors = NeighborRule::Stronger;
    /// Drop gated peaks that are sidelobes of stronger ones (see reject_leakage).
    bool leakage_check = true;

    void validate() const {
        if (l_factor < 1) throw Error(ErrorKind::DomainError, "l_factor must be >= 1");
        if (!(peak_gate_epsilon > 0.0 && peak_gate_epsilon < 1.0))
            throw Error(ErrorKind::DomainError, "peak_gate_epsilon must lie in (0, 1)");
    }
    bool operator==(const InitConfig&) const = default;
};

/// Sorted, duplicate-free initial frequencies in [0, 2pi).
struct CandidateSet {
    std::vector<double> omegas;

    std::size_t size() const { return omegas.size(); }
    RVec as_vector() const { return Eigen::Map<const RVec>(omegas.data(), static_cast<Eigen::Index>(omegas.size())); }
};

namespace detail {

inline std::size_t bin_of(double omega, std::size_t fft_len) {
    const auto k = static_cast<long>(std::llround(wrap_angle(omega) * static_cast<double>(fft_len) / kTwoPi));
    return static_cast<std::size_t>(((k % static_cast<long>(fft_len)) + static_cast<long>(fft_len)) %
                                    static_cast<long>(fft_len));
}

} // namespace detail

/// L-point DFT of y zero-padded to L = l_factor * N; bin k sits at 2 pi k / L.
inline CVec zero_padded_fft(const Signal& observed, const InitConfig& cfg) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(observed.size());
    const std::size_t fft_len = n * static_cast<std::size_t>(cfg.l_factor);
    if (fft_len == 0) return CVec(0);
    CVec padded = CVec::Zero(static_cast<Eigen::Index>(fft_len));
    padded.head(observed.size()) = observed.samples();
    CVec out;
    Eigen::FFT<double> fft;
    fft.fwd(out, padded);
    return out;
}

/// Per-sample noise variance from the spectrum median. Noise-only bins of
/// |y^f|^2 are exponential with mean N sigma^2, whose median is N sigma^2 ln 2.
inline double spectrum_noise_floor(const RVec& spectrum_mag, Eigen::Index n_samples) {
    std::vector<double> power(static_cast<std::size_t>(spectrum_mag.size()));
    for (Eigen::Index k = 0; k < spectrum_mag.size(); ++k) power[static_cast<std::size_t>(k)] = spectrum_mag[k] * spectrum_mag[k];
    if (power.empty()) return 0.0;
    auto mid = power.begin() + static_cast<std::ptrdiff_t>(power.size() / 2);
    std::nth_element(power.begin(), mid, power.end());
    return *mid / (std::numbers::ln2 * static_cast<double>(n_samples));
}

/// Local maxima of |y^f| (strict on the left, non-strict on the right,
/// circular) whose power clears noise_floor * N * ln(1/eps).
inline std::vector<std::size_t> find_peaks(const RVec& spectrum_mag, double noise_floor, const InitConfig& cfg) {
    cfg.validate();
    const auto fft_len = static_cast<std::size_t>(spectrum_mag.size());
    if (fft_len < 3) throw Error(ErrorKind::InvalidDimension, "find_peaks needs at least 3 bins");
    const double n_samples = static_cast<double>(fft_len) / static_cast<double>(cfg.l_factor);
    const double gate = std::max(0.0, noise_floor) * n_samples * -std::log(cfg.peak_gate_epsilon);

    std::vector<std::size_t> peaks;
    for (std::size_t k = 0; k < fft_len; ++k) {
        const double left = spectrum_mag[static_cast<Eigen::Index>((k + fft_len - 1) % fft_len)];
        const double right = spectrum_mag[static_cast<Eigen::Index>((k + 1) % fft_len)];
        const double here = spectrum_mag[static_cast<Eigen::Index>(k)];
        if (here > left && here >= right && here * here > gate) peaks.push_back(k);
    }
    return peaks;
}

/// Strongest-first pass over gated peaks: a peak survives only if the
/// residual left after least-squares fitting atoms at the peaks already kept
/// still clears the gate at that bin. Sidelobes of a strong tone fail this,
/// distinct tones pass it. Returns the survivors in bin order.
inline std::vector<std::size_t> reject_leakage(const std::vector<std::size_t>& peaks, const RVec& spectrum_mag,
                                               const Signal& observed, double noise_floor, const InitConfig& cfg) {
    if (peaks.size() < 2) return peaks;
    const auto fft_len = static_cast<std::size_t>(spectrum_mag.size());
    const Eigen::Index n_samples = observed.size();
    const double gate = std::max(0.0, noise_floor) * static_cast<double>(n_samples) * -std::log(cfg.peak_gate_epsilon);
    auto omega_of = [&](std::size_t k) { return kTwoPi * static_cast<double>(k) / static_cast<double>(fft_len); };

    std::vector<std::size_t> order = peaks;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return spectrum_mag[static_cast<Eigen::Index>(a)] > spectrum_mag[static_cast<Eigen::Index>(b)];
    });
    std::vector<std::size_t> kept{order.front()};
    for (std::size_t idx = 1; idx < order.size(); ++idx) {
        if (kept.size() >= static_cast<std::size_t>(n_samples)) break;
        RVec w(static_cast<Eigen::Index>(kept.size()));
        for (std::size_t i = 0; i < kept.size(); ++i) w[static_cast<Eigen::Index>(i)] = omega_of(kept[i]);
        const CMat a = design_matrix(w, n_samples);
        const CVec resid = observed.samples() - a * a.colPivHouseholderQr().solve(observed.samples());
        const double power = std::norm(atom(omega_of(order[idx]), n_samples).dot(resid));
        if (power > gate) kept.push_back(order[idx]);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

/// Adds each peak and its stronger (or both) neighbouring bins, converts to
/// frequencies and removes repeats.
inline CandidateSet augment_adjacent(const std::vector<std::size_t>& peaks, const RVec& spectrum_mag, const InitConfig& cfg) {
    const auto fft_len = static_cast<std::size_t>(spectrum_mag.size());
    std::vector<std::size_t> bins;
    for (std::size_t k : peaks) {
        if (k >= fft_len) throw Error(ErrorKind::InvalidDimension, "peak bin out of range");
        const std::size_t lo = (k + fft_len - 1) % fft_len;
        const std::size_t hi = (k + 1) % fft_len;
        bins.push_back(k);
        if (cfg.neighbors == NeighborRule::Both) {
            bins.push_back(lo);
            bins.push_back(hi);
        } else {
            bins.push_back(spectrum_mag[static_cast<Eigen::Index>(lo)] > spectrum_mag[static_cast<Eigen::Index>(hi)] ? lo : hi);
        }
    }
    std::sort(bins.begin(), bins.end());
    bins.erase(std::unique(bins.begin(), bins.end()), bins.end());

    CandidateSet out;
    out.omegas.reserve(bins.size());
    for (std::size_t k : bins) out.omegas.push_back(kTwoPi * static_cast<double>(k) / static_cast<double>(fft_len));
    return out;
}

/// Least-squares amplitudes (A^H A)^{-1} A^H y through a column-pivoted QR.
inline CVec ls_amplitudes(const RVec& omegas, const Signal& observed) {
    const Eigen::Index m = omegas.size();
    if (m == 0) return CVec(0);
    if (m > observed.size()) throw Error(ErrorKind::Overdetermined, "more candidate frequencies than samples");
    const CMat a = design_matrix(omegas, observed.size());
    const Eigen::JacobiSVD<CMat> svd(a);
    const auto& sv = svd.singularValues();
    const double smin = sv[sv.size() - 1];
    if (!(smin > 0.0) || sv[0] / smin > 1e12)
        throw Error(ErrorKind::IllConditioned, "design matrix is numerically rank deficient");
    return a.colPivHouseholderQr().solve(observed.samples());
}

inline CVec ls_amplitudes(const CandidateSet& candidates, const Signal& observed) {
    return ls_amplitudes(candidates.as_vector(), observed);
}

/// FFT peaks, neighbour augmentation and LS amplitudes. An ill-conditioned
/// candidate set loses the weaker member of its closest pair until it solves.
inline MnnState initialize(const Signal& observed, const InitConfig& cfg) {
    const CVec spectrum = zero_padded_fft(observed, cfg);
    const RVec mag = spectrum.cwiseAbs();
    const auto fft_len = static_cast<std::size_t>(mag.size());
    const double floor = spectrum_noise_floor(mag, observed.size());
    std::vector<std::size_t> peaks = find_peaks(mag, floor, cfg);
    if (cfg.leakage_check) peaks = reject_leakage(peaks, mag, observed, floor, cfg);
    CandidateSet cand = augment_adjacent(peaks, mag, cfg);

    auto strength = [&](double omega) { return mag[static_cast<Eigen::Index>(detail::bin_of(omega, fft_len))]; };

    // more candidates than samples: keep the strongest N
    if (cand.size() > static_cast<std::size_t>(observed.size())) {
        std::vector<double> by_power = cand.omegas;
        std::stable_sort(by_power.begin(), by_power.end(), [&](double a, double b) { return strength(a) > strength(b); });
        by_power.resize(static_cast<std::size_t>(observed.size()));
        std::sort(by_power.begin(), by_power.end());
        cand.omegas = std::move(by_power);
    }

    while (!cand.omegas.empty()) {
        try {
            CVec alphas = ls_amplitudes(cand, observed);
            return MnnState(cand.as_vector(), std::move(alphas));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::IllConditioned) throw;
        }
        if (cand.size() == 1) break;
        // closest pair, wrap-around included
        std::size_t best = 0;
        double best_gap = kTwoPi;
        for (std::size_t i = 0; i < cand.size(); ++i) {
            const std::size_t j = (i + 1) % cand.size();
            double gap = cand.omegas[j] - cand.omegas[i];
            if (gap < 0.0) gap += kTwoPi;
            if (gap < best_gap) {
                best_gap = gap;
                best = i;
            }
        }
        const std::size_t other = (best + 1) % cand.size();
        const std::size_t drop = strength(cand.omegas[best]) < strength(cand.omegas[other]) ? best : other;
        cand.omegas.erase(cand.omegas.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    return MnnState::empty();
}

/// Plain FFT estimator: gated peak bins (leakage-checked when cfg asks) with
/// amplitude y^f_k / N.
inline SinusoidSet periodogram_estimate(const Signal& observed, const InitConfig& cfg) {
    const CVec spectrum = zero_padded_fft(observed, cfg);
    const RVec mag = spectrum.cwiseAbs();
    const auto fft_len = static_cast<std::size_t>(mag.size());
    const double n = static_cast<double>(observed.size());
    SinusoidSet out;
    const double floor = spectrum_noise_floor(mag, observed.size());
    std::vector<std::size_t> peaks = find_peaks(mag, floor, cfg);
    if (cfg.leakage_check) peaks = reject_leakage(peaks, mag, observed, floor, cfg);
    for (std::size_t k : peaks) {
        out.push_back({spectrum[static_cast<Eigen::Index>(k)] / n, kTwoPi * static_cast<double>(k) / static_cast<double>(fft_len)});
    }
    return out;
}

} // namespace mnnspec
