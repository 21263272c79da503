#pragma once

// Special functions behind the merge and prune tests: the standard normal
// quantile, central F CDF/quantile and the noncentral F CDF, all built on the
// regularized incomplete beta function. Plus a one-sample Kolmogorov-Smirnov
// test for checking simulated statistics against them.

#include "mnnspec/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace mnnspec::stat {

struct FParams {
    double d1 = 1.0;
    double d2 = 1.0;
    double noncentrality = 0.0;
};

namespace detail {

inline void check_dof(const FParams& p) {
    if (!(p.d1 > 0.0) || !(p.d2 > 0.0) || !(p.noncentrality >= 0.0))
        throw Error(ErrorKind::DomainError, "F parameters need d1, d2 > 0 and noncentrality >= 0");
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
inline double beta_cf(double u, double a, double b) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * u / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * u / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * u / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

// log of u^a (1-u)^b / (a B(a,b)), the prefactor of the continued fraction.
inline double log_front(double u, double a, double b) {
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(u) + b * std::log1p(-u);
}

} // namespace detail

/// Regularized incomplete beta I_u(a, b).
inline double reg_inc_beta(double u, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorKind::DomainError, "reg_inc_beta needs a, b > 0");
    if (!(u >= 0.0 && u <= 1.0)) throw Error(ErrorKind::DomainError, "reg_inc_beta needs u in [0, 1]");
    if (u == 0.0) return 0.0;
    if (u == 1.0) return 1.0;
    // Continued fraction converges fast below the mean; reflect otherwise.
    if (u < (a + 1.0) / (a + b + 2.0)) {
        return std::exp(detail::log_front(u, a, b)) * detail::beta_cf(u, a, b) / a;
    }
    const double v = 1.0 - u;
    return 1.0 - std::exp(detail::log_front(v, b, a)) * detail::beta_cf(v, b, a) / b;
}

/// 1 - I_u(a, b) evaluated without cancellation, taking v = 1 - u directly.
inline double reg_inc_beta_complement(double v, double a, double b) { return reg_inc_beta(v, b, a); }

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Standard normal quantile. Rational first guess refined by Halley steps on erfc.
inline double std_normal_inv_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::DomainError, "normal quantile needs p in (0, 1)");
    if (p > 0.5) return -std_normal_inv_cdf(1.0 - p);
    if (p == 0.5) return 0.0;

    // Acklam's lower-region and central-region approximations.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    double x;
    if (p < 0.02425) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    for (int i = 0; i < 3; ++i) {
        const double e = std_normal_cdf(x) - p;
        const double u = e * std::sqrt(2.0 * kPi) * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

/// Central F CDF.
inline double f_cdf(double x, const FParams& p) {
    detail::check_dof(p);
    if (!(x >= 0.0)) throw Error(ErrorKind::DomainError, "f_cdf needs x >= 0");
    if (std::isinf(x)) return 1.0;
    const double denom = p.d1 * x + p.d2;
    return reg_inc_beta(p.d1 * x / denom, 0.5 * p.d1, 0.5 * p.d2);
}

/// Central F survival function 1 - CDF, accurate deep in the upper tail.
inline double f_sf(double x, const FParams& p) {
    detail::check_dof(p);
    if (!(x >= 0.0)) throw Error(ErrorKind::DomainError, "f_sf needs x >= 0");
    if (std::isinf(x)) return 0.0;
    const double denom = p.d1 * x + p.d2;
    return reg_inc_beta_complement(p.d2 / denom, 0.5 * p.d1, 0.5 * p.d2);
}

/// Central F quantile by bracketing and bisection. Upper-tail probabilities
/// are matched on the survival function so 1 - 1e-6 keeps full precision.
inline double f_inv_cdf(double prob, const FParams& p) {
    detail::check_dof(p);
    if (!(prob >= 0.0 && prob < 1.0)) throw Error(ErrorKind::DomainError, "f_inv_cdf needs p in [0, 1)");
    if (prob == 0.0) return 0.0;

    const bool upper = prob > 0.5;
    const double target = upper ? 1.0 - prob : prob;
    // g(x) increases with x in both branches
    auto g = [&](double x) { return upper ? target - f_sf(x, p) : f_cdf(x, p) - target; };

    double lo = 0.0;
    double hi = 1.0;
    while (g(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw Error(ErrorKind::DomainError, "f_inv_cdf failed to bracket");
    }
    for (int i = 0; i < 400; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (g(mid) < 0.0) lo = mid;
        else hi = mid;
        if (hi - lo <= 1e-15 * hi) break;
    }
    return 0.5 * (lo + hi);
}

namespace detail {

// Poisson(lambda/2)-weighted mixture of incomplete betas, summed outward from
// the mode. `term(k)` returns the beta factor for shift k.
template <typename Term>
double poisson_mixture(double noncentrality, Term&& term) {
    constexpr double kTail = 1e-12;
    const double mu = 0.5 * noncentrality;
    const auto mode = static_cast<long>(std::floor(mu));
    auto log_weight = [&](long k) { return -mu + k * std::log(mu) - std::lgamma(static_cast<double>(k) + 1.0); };

    double sum = 0.0;
    double mass = 0.0;
    for (long k = mode; k >= 0; --k) {
        const double w = std::exp(log_weight(k));
        sum += w * term(k);
        mass += w;
        if (w < 1e-18 && k < mode) break;
    }
    for (long k = mode + 1; 1.0 - mass > kTail; ++k) {
        const double w = std::exp(log_weight(k));
        sum += w * term(k);
        mass += w;
        if (w == 0.0 || k > mode + 100000) break;
    }
    return sum;
}

} // namespace detail

/// Noncentral F CDF as a Poisson mixture of incomplete betas, truncated once
/// the unsummed Poisson mass drops below 1e-12.
inline double noncentral_f_cdf(double x, const FParams& p) {
    detail::check_dof(p);
    if (!(x >= 0.0)) throw Error(ErrorKind::DomainError, "noncentral_f_cdf needs x >= 0");
    if (p.noncentrality == 0.0) return f_cdf(x, p);
    if (std::isinf(x)) return 1.0;
    if (x == 0.0) return 0.0;
    const double u = p.d1 * x / (p.d1 * x + p.d2);
    return std::clamp(
        detail::poisson_mixture(p.noncentrality,
                                [&](long k) { return reg_inc_beta(u, 0.5 * p.d1 + k, 0.5 * p.d2); }),
        0.0, 1.0);
}

/// Noncentral F survival function.
inline double noncentral_f_sf(double x, const FParams& p) {
    detail::check_dof(p);
    if (!(x >= 0.0)) throw Error(ErrorKind::DomainError, "noncentral_f_sf needs x >= 0");
    if (p.noncentrality == 0.0) return f_sf(x, p);
    if (std::isinf(x)) return 0.0;
    if (x == 0.0) return 1.0;
    const double v = p.d2 / (p.d1 * x + p.d2);
    return std::clamp(
        detail::poisson_mixture(p.noncentrality,
                                [&](long k) { return reg_inc_beta_complement(v, 0.5 * p.d1 + k, 0.5 * p.d2); }),
        0.0, 1.0);
}

/// Kolmogorov distribution survival function Pr(K > x), alternating series.
inline double kolmogorov_sf(double x) {
    if (!(x >= 0.0)) throw Error(ErrorKind::DomainError, "kolmogorov_sf needs x >= 0");
    if (x < 0.2) return 1.0; // series converges slowly there; the value is 1 to ~1e-10
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0.0; ///< sup |F_n - F|
    double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against `cdf`, p-value from the
/// asymptotic law with Stephens' small-sample factor.
template <typename Cdf>
KsResult ks_test(std::vector<double> samples, Cdf&& cdf) {
    if (samples.empty()) throw Error(ErrorKind::InvalidDimension, "ks_test needs samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    KsResult r;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        r.statistic = std::max({r.statistic, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    const double rn = std::sqrt(n);
    r.p_value = kolmogorov_sf((rn + 0.12 + 0.11 / rn) * r.statistic);
    return r;
}

} // namespace mnnspec::stat
