#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mnnspec {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum class ErrorKind {
    InvalidDimension,
    DegenerateInput,
    NumericalDivergence,
    Overdetermined,
    IllConditioned,
    SingularInformation,
    DegenerateResidual,
    DomainError,
    Parse,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidDimension: return "InvalidDimension";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::NumericalDivergence: return "NumericalDivergence";
    case ErrorKind::Overdetermined: return "Overdetermined";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::SingularInformation: return "SingularInformation";
    case ErrorKind::DegenerateResidual: return "DegenerateResidual";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::Parse: return "Parse";
    }
    return "Unknown";
}

/// Every failure in the library surfaces as this exception; `kind()` tells
/// callers which contract was violated.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Maps any real angle into [0, 2pi).
inline double wrap_angle(double omega) {
    double w = std::fmod(omega, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    // fmod of a tiny negative number can round back up to exactly 2pi
    if (w >= kTwoPi) w = 0.0;
    return w;
}

struct Sinusoid {
    cplx amplitude{0.0, 0.0};
    double omega = 0.0; ///< radians/sample

    double normalized_freq() const { return omega / kTwoPi; }
    bool operator==(const Sinusoid&) const = default;
};

using SinusoidSet = std::vector<Sinusoid>;

/// Observed (or synthesized) complex samples y[0..N-1].
class Signal {
public:
    Signal() = default;
    explicit Signal(CVec samples) : samples_(std::move(samples)) {
        if (samples_.size() < 1) throw Error(ErrorKind::InvalidDimension, "signal needs at least one sample");
        if (!samples_.allFinite()) throw Error(ErrorKind::DegenerateInput, "signal samples must be finite");
    }

    Eigen::Index size() const { return samples_.size(); }
    const CVec& samples() const { return samples_; }
    double energy() const { return samples_.squaredNorm(); }

    friend bool operator==(const Signal& a, const Signal& b) {
        return a.samples_.size() == b.samples_.size() && a.samples_ == b.samples_;
    }

private:
    CVec samples_;
};

} // namespace mnnspec
