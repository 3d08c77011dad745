#pragma once

// Clarke transform between phase quantities and the stationary alpha-beta frame.
//
// Convention: amplitude invariant (2/3 scaling). A balanced set
//   a = |V| sin(wt), b = |V| sin(wt - 120deg), c = |V| sin(wt + 120deg)
// maps onto alpha = |V| sin(wt), beta = -|V| cos(wt). The zero-sequence
// component is discarded.
//
// The scaling is not stated by the source model; it is inferred from the
// 3/2 factor in the instantaneous power expression, which yields physical
// watts only with amplitude-invariant components.

#include <cmath>
#include <complex>
#include <numbers>

#include "sercomp/errors.hpp"

namespace sercomp {

inline constexpr double kSqrt3 = std::numbers::sqrt3;

struct ThreePhaseSample {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    constexpr double sum() const noexcept { return a + b + c; }
    bool finite() const noexcept {
        return std::isfinite(a) && std::isfinite(b) && std::isfinite(c);
    }
};

struct AlphaBetaPair {
    double alpha = 0.0;
    double beta = 0.0;

    double magnitude() const noexcept { return std::hypot(alpha, beta); }
    bool finite() const noexcept { return std::isfinite(alpha) && std::isfinite(beta); }

    /// Space vector alpha + j beta.
    std::complex<double> to_complex() const noexcept { return {alpha, beta}; }
    static AlphaBetaPair from_complex(std::complex<double> z) noexcept {
        return {z.real(), z.imag()};
    }

    friend constexpr AlphaBetaPair operator+(AlphaBetaPair x, AlphaBetaPair y) noexcept {
        return {x.alpha + y.alpha, x.beta + y.beta};
    }
    friend constexpr AlphaBetaPair operator-(AlphaBetaPair x, AlphaBetaPair y) noexcept {
        return {x.alpha - y.alpha, x.beta - y.beta};
    }
    friend constexpr AlphaBetaPair operator*(double k, AlphaBetaPair x) noexcept {
        return {k * x.alpha, k * x.beta};
    }
    friend constexpr bool operator==(const AlphaBetaPair&, const AlphaBetaPair&) = default;
};

constexpr AlphaBetaPair clarke(const ThreePhaseSample& x) noexcept {
    return {(2.0 / 3.0) * (x.a - 0.5 * x.b - 0.5 * x.c), (x.b - x.c) / kSqrt3};
}

constexpr ThreePhaseSample inverse_clarke(const AlphaBetaPair& x) noexcept {
    const double half_alpha = -0.5 * x.alpha;
    const double k = 0.5 * kSqrt3 * x.beta;
    return {x.alpha, half_alpha + k, half_alpha - k};
}

/// Snapshot of a balanced positive-sequence signal of the given amplitude at
/// electrical angle `phase`: (|V| sin(phase), -|V| cos(phase)).
/// Its time derivative at constant speed w is (-w beta, w alpha).
inline AlphaBetaPair balanced_phasor(double amplitude, double phase) {
    if (!(amplitude >= 0.0)) {
        throw InvalidArgument("balanced_phasor: amplitude must be non-negative");
    }
    return {amplitude * std::sin(phase), -amplitude * std::cos(phase)};
}

/// Phase quantities of a balanced set with the same convention as balanced_phasor.
inline ThreePhaseSample balanced_abc(double amplitude, double phase) {
    constexpr double shift = 2.0 * std::numbers::pi / 3.0;
    return {amplitude * std::sin(phase), amplitude * std::sin(phase - shift),
            amplitude * std::sin(phase + shift)};
}

}  // namespace sercomp
