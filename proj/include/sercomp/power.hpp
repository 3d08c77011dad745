#pragma once

// Instantaneous power at the sending end and its dynamics along the reduced
// line model.
//
// Sign convention: P and Q carry the leading minus of the source expression,
//   P = -3/2 (vs_a i_a + vs_b i_b),   Q = -3/2 (vs_b i_a - vs_a i_b),
// so power leaving the sending bus into the line is negative. `delivered()`
// flips both signs.

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "sercomp/errors.hpp"
#include "sercomp/line_models.hpp"
#include "sercomp/transforms.hpp"

namespace sercomp {

struct PQ {
    double p = 0.0;  // W
    double q = 0.0;  // var

    /// Flow from the sending bus into the line, positive when delivered.
    PQ delivered() const noexcept { return {-p, -q}; }
    bool finite() const noexcept { return std::isfinite(p) && std::isfinite(q); }
    friend constexpr bool operator==(const PQ&, const PQ&) = default;
};

/// Time derivative of (P, Q).
struct PQRate {
    double dp = 0.0;  // W/s
    double dq = 0.0;  // var/s
};

/// Bus and converter voltages in the stationary frame. The net line drive is
/// vs - vr + vcon.
struct BusVoltages {
    AlphaBetaPair vs;
    AlphaBetaPair vr;
    AlphaBetaPair vcon;

    AlphaBetaPair net_drive() const noexcept { return vs - vr + vcon; }
    /// vs - vr
    AlphaBetaPair delta() const noexcept { return vs - vr; }
    bool finite() const noexcept { return vs.finite() && vr.finite() && vcon.finite(); }
};

constexpr PQ instantaneous_pq(const AlphaBetaPair& vs, const AlphaBetaPair& i) noexcept {
    return {-1.5 * (vs.alpha * i.alpha + vs.beta * i.beta),
            -1.5 * (vs.beta * i.alpha - vs.alpha * i.beta)};
}

/// Sinusoidal steady-state line current at the instant where the bus voltages
/// equal the given snapshots.
///
/// A balanced snapshot (x_a, x_b) at t = 0 has alpha phasor X = x_a + j x_b and
/// beta phasor -jX. The line transfer functions at s = jw act on these phasors
/// and the real parts give the current snapshot at t = 0.
inline AlphaBetaPair steady_state_current(const BusVoltages& bus, const LineParams& params,
                                          const CompensationSpec& comp) {
    const TransferFunctionPoint g = line_transfer(params, comp, Complex(0.0, params.omega));
    const Complex va = bus.net_drive().to_complex();
    const Complex vb = Complex(0.0, -1.0) * va;
    const Complex ia = g.g_aa * va + g.g_ab * vb;
    const Complex ib = g.g_ba * va + g.g_bb * vb;
    return {ia.real(), ib.real()};
}

/// Steady-state power flow computed from the bus voltages through the line
/// transfer functions. Constant in time for balanced operation.
inline PQ steady_state_pq(const BusVoltages& bus, const LineParams& params,
                          const CompensationSpec& comp) {
    params.validate();
    comp.validate(params);
    return instantaneous_pq(bus.vs, steady_state_current(bus, params, comp));
}

/// Rotation rate of (P, Q) contributed by the line: w - 1/(w L C).
inline double effective_coupling(const LineParams& params, const CompensationSpec& comp) {
    return params.omega -
           1.0 / (params.omega * params.l_series * comp.c_series_total);
}

/// Dynamics of (P, Q) along the reduced model with the sending voltage rotating
/// at w. Obtained by differentiating the instantaneous power along the reduced
/// current dynamics; the result is affine in vcon:
///
///   dP/dt = -3/(2L) [|vs|^2 - vs.vr + vs.vcon]          - w_eff Q - (R/L) P
///   dQ/dt = -3/(2L) [-(vs x vr) + (vs x vcon)]          + w_eff P - (R/L) Q
///
/// with a.b = a_alpha b_alpha + a_beta b_beta, a x b = a_beta b_alpha - a_alpha b_beta
/// and w_eff = w - 1/(w L C).
inline PQRate pq_derivatives(const PQ& state, const BusVoltages& bus, const LineParams& params,
                             const CompensationSpec& comp) {
    if (!comp.compensated())
        throw InvalidArgument("pq_derivatives: requires n_pu > 0");
    const double L = params.l_series;
    const double k = 1.5 / L;
    const double w_eff = effective_coupling(params, comp);
    const double rl = params.r_series / L;
    const auto& vs = bus.vs;
    const auto dot = [](const AlphaBetaPair& x, const AlphaBetaPair& y) {
        return x.alpha * y.alpha + x.beta * y.beta;
    };
    const auto cross = [](const AlphaBetaPair& x, const AlphaBetaPair& y) {
        return x.beta * y.alpha - x.alpha * y.beta;
    };
    return {
        -k * (dot(vs, vs) - dot(vs, bus.vr) + dot(vs, bus.vcon)) - w_eff * state.q - rl * state.p,
        -k * (-cross(vs, bus.vr) + cross(vs, bus.vcon)) + w_eff * state.p - rl * state.q,
    };
}

/// d(dP/dt, dQ/dt) / d(vcon_alpha, vcon_beta). Its determinant is
/// -(3/(2L))^2 |vs|^2, singular only for a collapsed sending bus.
inline Eigen::Matrix2d power_jacobian(const AlphaBetaPair& vs, const LineParams& params) {
    const double k = 1.5 / params.l_series;
    Eigen::Matrix2d j;
    j << -k * vs.alpha, -k * vs.beta,
         -k * vs.beta,   k * vs.alpha;
    return j;
}

}  // namespace sercomp
