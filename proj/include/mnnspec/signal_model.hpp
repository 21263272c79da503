#pragma once

#include "mnnspec/core.hpp"

#include <cstdint>
#include <random>

namespace mnnspec {

struct NoiseSpec {
    double sigma2 = 0.0; ///< total per-sample variance of the circular complex Gaussian
    std::uint64_t seed = 0;
};

/// Unit-modulus steering vector [1, e^{jw}, ..., e^{jw(N-1)}].
inline CVec atom(double omega, Eigen::Index n_samples) {
    if (n_samples < 1) throw Error(ErrorKind::InvalidDimension, "atom needs n_samples >= 1");
    CVec a(n_samples);
    // reduce first so large |omega| does not cost precision in omega * n
    const double w = wrap_angle(omega);
    for (Eigen::Index n = 0; n < n_samples; ++n) a[n] = std::polar(1.0, w * static_cast<double>(n));
    return a;
}

/// N x M matrix whose columns are atoms at the given frequencies.
inline CMat design_matrix(const RVec& omegas, Eigen::Index n_samples) {
    if (omegas.size() < 1) throw Error(ErrorKind::InvalidDimension, "design_matrix needs at least one frequency");
    if (n_samples < 1) throw Error(ErrorKind::InvalidDimension, "design_matrix needs n_samples >= 1");
    CMat a(n_samples, omegas.size());
    for (Eigen::Index i = 0; i < omegas.size(); ++i) a.col(i) = atom(omegas[i], n_samples);
    return a;
}

/// Noise-free sum of the given components, no noise added.
inline CVec clean_signal(const SinusoidSet& components, Eigen::Index n_samples) {
    if (n_samples < 1) throw Error(ErrorKind::InvalidDimension, "signal needs n_samples >= 1");
    CVec x = CVec::Zero(n_samples);
    for (const auto& c : components) {
        if (!std::isfinite(c.amplitude.real()) || !std::isfinite(c.amplitude.imag()) || !std::isfinite(c.omega))
            throw Error(ErrorKind::DegenerateInput, "component parameters must be finite");
        x += c.amplitude * atom(c.omega, n_samples);
    }
    return x;
}

/// Circular complex Gaussian noise; real and imaginary parts each carry sigma2 / 2.
inline CVec complex_noise(Eigen::Index n_samples, double sigma2, std::mt19937_64& rng) {
    if (!(sigma2 >= 0.0)) throw Error(ErrorKind::DomainError, "noise variance must be >= 0");
    CVec e(n_samples);
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 * sigma2));
    for (Eigen::Index n = 0; n < n_samples; ++n) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        e[n] = cplx(re, im);
    }
    return e;
}

inline Signal synthesize(const SinusoidSet& components, Eigen::Index n_samples, const NoiseSpec& noise) {
    CVec x = clean_signal(components, n_samples);
    if (noise.sigma2 > 0.0) {
        std::mt19937_64 rng(noise.seed);
        x += complex_noise(n_samples, noise.sigma2, rng);
    } else if (noise.sigma2 < 0.0) {
        throw Error(ErrorKind::DomainError, "noise variance must be >= 0");
    }
    return Signal(std::move(x));
}

/// Per-sample noise variance giving an expected ||x||^2 / ||e||^2 of snr_db.
inline double noise_var_for_snr(const CVec& clean, double snr_db) {
    const double energy = clean.squaredNorm();
    if (!(energy > 0.0)) throw Error(ErrorKind::DegenerateInput, "SNR is undefined for an all-zero signal");
    return energy / (static_cast<double>(clean.size()) * std::pow(10.0, snr_db / 10.0));
}

inline double noise_var_for_snr(const Signal& clean, double snr_db) { return noise_var_for_snr(clean.samples(), snr_db); }

} // namespace mnnspec
