#pragma once

// Finite-difference check of the analytic gradients. Real parameters are
// (Re alpha_i, Im alpha_i, omega_i); dC/dRe = 2 Re g, dC/dIm = 2 Im g for the
// conjugate gradient g = dC/d(alpha*).

#include "mnnspec/core.hpp"
#include "mnnspec/mnn_optimizer.hpp"
#include "mnnspec/signal_model.hpp"

#include <cstdint>
#include <random>

namespace mnnspec {

struct GradCheckResult {
    double max_rel_error = 0.0; ///< worst ||g - g_fd|| / ||g_fd|| over instances
    int instances = 0;
};

/// Analytic gradient as a real vector, scaled by (1 + perturb) for the
/// negative control.
inline RVec analytic_real_gradient(const MnnState& state, const Signal& y, double perturb = 0.0) {
    const CVec ga = grad_alpha(state, y);
    const RVec gw = grad_omega(state, y);
    RVec g(3 * state.size());
    for (Eigen::Index i = 0; i < state.size(); ++i) {
        g[3 * i] = 2.0 * ga[i].real();
        g[3 * i + 1] = 2.0 * ga[i].imag();
        g[3 * i + 2] = gw[i];
    }
    return g * (1.0 + perturb);
}

/// Central differences of the cost with step h in every real parameter.
inline RVec numeric_real_gradient(const MnnState& state, const Signal& y, double h) {
    RVec g(3 * state.size());
    auto c = [&](const MnnState& s) { return cost(y, forward(s, y.size())); };
    for (Eigen::Index i = 0; i < state.size(); ++i) {
        for (int p = 0; p < 3; ++p) {
            MnnState up = state, dn = state;
            if (p == 0) { up.alphas[i] += h; dn.alphas[i] -= h; }
            else if (p == 1) { up.alphas[i] += cplx(0.0, h); dn.alphas[i] -= cplx(0.0, h); }
            else { up.omegas[i] += h; dn.omegas[i] -= h; }
            g[3 * i + p] = (c(up) - c(dn)) / (2.0 * h);
        }
    }
    return g;
}

/// Random instances: y with unit-variance complex Gaussian samples, frequencies
/// uniform on [0, 2pi), amplitudes complex Gaussian.
inline GradCheckResult gradient_check(Eigen::Index n_samples, Eigen::Index m_nodes, int trials, std::uint64_t seed,
                                      double perturb = 0.0, double step = 1e-6) {
    if (n_samples < 2 || m_nodes < 1 || trials < 1) throw Error(ErrorKind::InvalidDimension, "gradient_check needs n >= 2, m >= 1, trials >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    GradCheckResult out;
    for (int t = 0; t < trials; ++t) {
        const Signal y(complex_noise(n_samples, 1.0, rng));
        RVec w(m_nodes);
        for (auto& v : w) v = u(rng);
        const MnnState state(w, complex_noise(m_nodes, 1.0, rng));
        const RVec fd = numeric_real_gradient(state, y, step);
        const RVec an = analytic_real_gradient(state, y, perturb);
        out.max_rel_error = std::max(out.max_rel_error, (an - fd).norm() / std::max(fd.norm(), 1e-300));
        ++out.instances;
    }
    return out;
}

} // namespace mnnspec
