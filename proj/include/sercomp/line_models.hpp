#pragma once

// Plant models of a series-capacitor-compensated transmission line.
//
// Three descriptions of the same physical loop are provided:
//   * the per-phase series RLC model (states: line current, capacitor voltage),
//   * the reduced alpha-beta model, where the capacitor voltage is replaced by
//     its sinusoidal steady-state value so that it appears as a static
//     quadrature coupling 1/(wC) between I_alpha and I_beta,
//   * a split-pi validation model with shunt charging capacitance.
//
// The reduced model reproduces the sinusoidal steady state exactly but not the
// transient subsynchronous mode; the per-phase model is the one to use for SSR
// studies.

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "sercomp/errors.hpp"

namespace sercomp {

using Complex = std::complex<double>;

inline constexpr double kNominalFrequencyHz = 60.0;

struct LineParams {
    double r_series = 8.5;                                    // ohm, per phase
    double l_series = 0.25;                                   // H, per phase
    double omega = 2.0 * std::numbers::pi * kNominalFrequencyHz;  // rad/s
    double c_shunt_per_end = 0.0;                             // F, split-pi only

    double reactance() const noexcept { return omega * l_series; }
    double frequency_hz() const noexcept { return omega / (2.0 * std::numbers::pi); }

    void validate() const {
        if (!(r_series >= 0.0) || !std::isfinite(r_series))
            throw InvalidArgument("line: r_series must be finite and >= 0");
        if (!(l_series > 0.0) || !std::isfinite(l_series))
            throw InvalidArgument("line: l_series must be finite and > 0");
        if (!(omega > 0.0) || !std::isfinite(omega))
            throw InvalidArgument("line: omega must be finite and > 0");
        if (!(c_shunt_per_end >= 0.0) || !std::isfinite(c_shunt_per_end))
            throw InvalidArgument("line: c_shunt_per_end must be finite and >= 0");
    }
};

/// Series compensation. `c_series_total` is the single capacitance equivalent
/// to `num_segments` equal banks in series; zero means no capacitor (n_pu = 0).
struct CompensationSpec {
    double n_pu = 0.0;
    double c_series_total = 0.0;
    int num_segments = 1;

    static CompensationSpec none() noexcept { return {}; }

    bool compensated() const noexcept { return n_pu > 0.0; }

    double per_segment_capacitance() const noexcept {
        return c_series_total * static_cast<double>(num_segments);
    }

    /// Capacitive reactance of the whole installation at `omega`.
    double reactance(double omega) const noexcept {
        return compensated() ? 1.0 / (omega * c_series_total) : 0.0;
    }

    void validate(const LineParams& params) const {
        if (!(n_pu >= 0.0 && n_pu < 1.0))
            throw InvalidArgument("compensation: n_pu must lie in [0, 1)");
        if (num_segments < 1)
            throw InvalidArgument("compensation: num_segments must be >= 1");
        if (!compensated()) return;
        if (!(c_series_total > 0.0))
            throw InvalidArgument("compensation: c_series_total must be > 0 when n_pu > 0");
        const double w = params.omega;
        const double check = w * c_series_total * (n_pu * w * params.l_series);
        if (std::abs(check - 1.0) > 1e-9)
            throw InvalidArgument("compensation: capacitance does not realize X_C = N X_L");
    }
};

/// Series capacitance giving total capacitive reactance N X_L.
///
/// The total is C = 1 / (N w^2 L), which places the series-loop resonance at
/// sqrt(N) times the synchronous frequency. The capacitance is split into
/// `num_segments` equal banks in series, each of num_segments * C.
inline CompensationSpec size_series_capacitor(double n_pu, const LineParams& params,
                                              int num_segments = 1) {
    params.validate();
    if (!(n_pu > 0.0))
        throw InvalidArgument("size_series_capacitor: n_pu must be > 0");
    if (!(n_pu < 1.0))
        throw InvalidArgument("size_series_capacitor: n_pu must be < 1 (full compensation)");
    if (num_segments < 1)
        throw InvalidArgument("size_series_capacitor: num_segments must be >= 1");
    const double w = params.omega;
    return {n_pu, 1.0 / (n_pu * w * w * params.l_series), num_segments};
}

/// n_pu == 0 yields CompensationSpec::none(), otherwise size_series_capacitor.
inline CompensationSpec compensation_for(double n_pu, const LineParams& params,
                                         int num_segments = 1) {
    if (n_pu == 0.0) {
        CompensationSpec c;
        c.num_segments = num_segments;
        return c;
    }
    return size_series_capacitor(n_pu, params, num_segments);
}

/// Series-loop resonance sqrt(N) f0.
inline double ssr_frequency(double n_pu, double f0 = kNominalFrequencyHz) {
    if (!(n_pu >= 0.0 && n_pu < 1.0))
        throw InvalidArgument("ssr_frequency: n_pu must lie in [0, 1)");
    return std::sqrt(n_pu) * f0;
}

inline double loadability_gain(double n_pu) {
    if (!(n_pu >= 0.0 && n_pu < 1.0))
        throw InvalidArgument("loadability_gain: n_pu must lie in [0, 1)");
    return 1.0 / (1.0 - n_pu);
}

/// Net series reactance w L (1 - N).
inline double effective_reactance(const LineParams& params, double n_pu) {
    return params.reactance() * (1.0 - n_pu);
}

/// Transfer limit at a 90 degree angle between the buses.
inline double max_power(double vs, double vr, double x_eff) {
    if (!(x_eff > 0.0))
        throw InvalidArgument("max_power: x_eff must be > 0");
    return vs * vr / x_eff;
}

// ---------------------------------------------------------------------------
// Reduced alpha-beta model and its transfer functions

/// d/dt [I_alpha, I_beta] = a [I_alpha, I_beta] + b [V_alpha, V_beta].
struct ReducedModel {
    Eigen::Matrix2d a;
    Eigen::Matrix2d b;
};

inline ReducedModel reduced_model(const LineParams& params, const CompensationSpec& comp) {
    params.validate();
    comp.validate(params);
    if (!comp.compensated())
        throw InvalidArgument("reduced_model: requires n_pu > 0 (use build_abc_plant)");
    const double L = params.l_series;
    const double coupling = 1.0 / (params.omega * comp.c_series_total * L);
    ReducedModel m;
    m.a << -params.r_series / L, -coupling,
            coupling, -params.r_series / L;
    m.b = Eigen::Matrix2d::Identity() / L;
    return m;
}

/// Entries of the 2x2 admittance transfer matrix at one complex frequency.
struct TransferFunctionPoint {
    Complex g_aa;
    Complex g_ab;
    Complex g_ba;
    Complex g_bb;
};

namespace detail {

inline void check_pole(Complex den, double scale, const char* who) {
    if (den == Complex{} || std::abs(den) <= 1e-14 * scale) {
        throw PoleError(std::string(who) + ": evaluation at a pole of the line transfer function");
    }
}

}  // namespace detail

/// Line admittance from net drive voltage to line current. For n_pu == 0 this
/// is the C -> infinity limit, 1/(R + Ls) on the diagonal and no coupling.
inline TransferFunctionPoint line_transfer(const LineParams& params,
                                           const CompensationSpec& comp, Complex s) {
    const double R = params.r_series;
    const double L = params.l_series;
    const double w = params.omega;
    if (!comp.compensated()) {
        const Complex z = R + L * s;
        detail::check_pole(z, R + L * std::abs(s), "line_transfer");
        const Complex g = 1.0 / z;
        return {g, 0.0, 0.0, g};
    }
    const double C = comp.c_series_total;
    const double c2w2 = C * C * w * w;
    const Complex t2 = c2w2 * L * L * s * s;
    const Complex t1 = 2.0 * c2w2 * L * R * s;
    const double t0 = c2w2 * R * R;
    const Complex den = t2 + t1 + t0 + 1.0;
    detail::check_pole(den, std::abs(t2) + std::abs(t1) + t0 + 1.0, "transfer_function_eval");
    const Complex g_diag = c2w2 * (R + L * s) / den;
    const Complex g_cross = -C * w / den;
    return {g_diag, g_cross, -g_cross, g_diag};
}

inline TransferFunctionPoint transfer_function_eval(const LineParams& params,
                                                    const CompensationSpec& comp, Complex s) {
    params.validate();
    comp.validate(params);
    if (!comp.compensated())
        throw InvalidArgument("transfer_function_eval: requires n_pu > 0");
    return line_transfer(params, comp, s);
}

// ---------------------------------------------------------------------------
// Three-phase state-space plants

enum class PlantTopology { series_rlc, split_pi };

/// Linear time-invariant three-phase plant x' = a x + b u, y = c x.
///
/// series_rlc: per phase states (i, v_c) (just i when uncompensated); inputs are
/// the per-phase net drive V_S - V_R + V_CON; outputs i_a, i_b, i_c followed by
/// the capacitor voltages.
///
/// split_pi: inputs are the sending-side drive (V_S + V_CON) for a, b, c then
/// V_R for a, b, c; outputs are the sending-branch currents, receiving-branch
/// currents, series-capacitor currents and (when compensated) series-capacitor
/// voltages, each for a, b, c.
struct AbcPlantModel {
    PlantTopology topology = PlantTopology::series_rlc;
    Eigen::MatrixXd a;
    Eigen::MatrixXd b;
    Eigen::MatrixXd c;
    std::vector<std::string> state_names;
    std::vector<std::string> input_names;
    std::vector<std::string> output_names;

    Eigen::Index state_dim() const noexcept { return a.rows(); }
    Eigen::Index input_dim() const noexcept { return b.cols(); }

    Eigen::VectorXcd eigenvalues() const {
        return Eigen::EigenSolver<Eigen::MatrixXd>(a, false).eigenvalues();
    }

    Eigen::Index output_index(const std::string& name) const {
        for (std::size_t k = 0; k < output_names.size(); ++k)
            if (output_names[k] == name) return static_cast<Eigen::Index>(k);
        throw InvalidArgument("AbcPlantModel: no output named " + name);
    }
};

namespace detail {
inline constexpr const char* kPhases[3] = {"a", "b", "c"};
}

inline AbcPlantModel build_abc_plant(const LineParams& params, const CompensationSpec& comp) {
    params.validate();
    comp.validate(params);
    const bool cap = comp.compensated();
    const Eigen::Index per_phase = cap ? 2 : 1;
    const Eigen::Index n = 3 * per_phase;
    const double R = params.r_series;
    const double L = params.l_series;

    AbcPlantModel m;
    m.topology = PlantTopology::series_rlc;
    m.a = Eigen::MatrixXd::Zero(n, n);
    m.b = Eigen::MatrixXd::Zero(n, 3);
    m.c = Eigen::MatrixXd::Zero(cap ? 6 : 3, n);
    for (Eigen::Index p = 0; p < 3; ++p) {
        const Eigen::Index i = per_phase * p;
        const std::string ph = detail::kPhases[p];
        m.a(i, i) = -R / L;
        m.b(i, p) = 1.0 / L;
        m.c(p, i) = 1.0;
        m.state_names.push_back("i_" + ph);
        m.input_names.push_back("v_" + ph);
        if (cap) {
            const Eigen::Index v = i + 1;
            m.a(i, v) = -1.0 / L;
            m.a(v, i) = 1.0 / comp.c_series_total;
            m.c(3 + p, v) = 1.0;
            m.state_names.push_back("vc_" + ph);
        }
    }
    for (const char* ph : detail::kPhases) m.output_names.push_back(std::string("i_") + ph);
    if (cap)
        for (const char* ph : detail::kPhases) m.output_names.push_back(std::string("vc_") + ph);
    return m;
}

/// Split-pi validation model: two half-line series branches (R/2, L/2) with
/// the series capacitor at midline. Each half-line pi section carries
/// c_shunt_per_end / 2 at both of its ends, so the midline holds
/// c_shunt_per_end / 2 on either side of the capacitor and the line totals
/// 2 c_shunt_per_end. The end shunts sit directly across the ideal bus
/// sources and therefore carry no state.
///
/// Per phase states: i1 (sending branch), i2 (receiving branch), v_m1 and v_m2
/// (node voltages either side of the series capacitor). Uncompensated, the two
/// midline nodes merge into one.
inline AbcPlantModel build_split_pi(const LineParams& params, const CompensationSpec& comp) {
    params.validate();
    comp.validate(params);
    if (!(params.c_shunt_per_end > 0.0))
        throw InvalidArgument("build_split_pi: c_shunt_per_end must be > 0");
    const bool cap = comp.compensated();
    const Eigen::Index per_phase = cap ? 4 : 3;
    const Eigen::Index n = 3 * per_phase;
    const double R = params.r_series;
    const double L = params.l_series;
    const double c_mid = 0.5 * params.c_shunt_per_end;

    AbcPlantModel m;
    m.topology = PlantTopology::split_pi;
    m.a = Eigen::MatrixXd::Zero(n, n);
    m.b = Eigen::MatrixXd::Zero(n, 6);
    m.c = Eigen::MatrixXd::Zero(cap ? 12 : 9, n);

    for (Eigen::Index p = 0; p < 3; ++p) {
        const Eigen::Index i1 = per_phase * p;
        const Eigen::Index i2 = i1 + 1;
        const Eigen::Index v1 = i1 + 2;
        const Eigen::Index v2 = cap ? i1 + 3 : v1;
        const std::string ph = detail::kPhases[p];

        m.a(i1, i1) = -R / L;
        m.a(i1, v1) = -2.0 / L;
        m.b(i1, p) = 2.0 / L;
        m.a(i2, i2) = -R / L;
        m.a(i2, v2) = 2.0 / L;
        m.b(i2, 3 + p) = -2.0 / L;

        m.c(p, i1) = 1.0;
        m.c(3 + p, i2) = 1.0;
        if (cap) {
            // Capacitor current from charge balance of the three-capacitor cut:
            // i_c = C_s (i1 + i2) / (C_m + 2 C_s).
            const double cs = comp.c_series_total;
            const double k = cs / (c_mid + 2.0 * cs);
            m.a(v1, i1) = (1.0 - k) / c_mid;
            m.a(v1, i2) = -k / c_mid;
            m.a(v2, i1) = k / c_mid;
            m.a(v2, i2) = -(1.0 - k) / c_mid;
            m.c(6 + p, i1) = k;
            m.c(6 + p, i2) = k;
            m.c(9 + p, v1) = 1.0;
            m.c(9 + p, v2) = -1.0;
            m.state_names.insert(m.state_names.end(),
                                 {"i1_" + ph, "i2_" + ph, "vm1_" + ph, "vm2_" + ph});
        } else {
            m.a(v1, i1) = 1.0 / (2.0 * c_mid);
            m.a(v1, i2) = -1.0 / (2.0 * c_mid);
            // No capacitor: the midline current is the mean branch current.
            m.c(6 + p, i1) = 0.5;
            m.c(6 + p, i2) = 0.5;
            m.state_names.insert(m.state_names.end(), {"i1_" + ph, "i2_" + ph, "vm_" + ph});
        }
    }
    for (const char* ph : detail::kPhases) m.input_names.push_back(std::string("vs_") + ph);
    for (const char* ph : detail::kPhases) m.input_names.push_back(std::string("vr_") + ph);
    for (const char* prefix : {"i_send_", "i_recv_", "i_series_"})
        for (const char* ph : detail::kPhases) m.output_names.push_back(std::string(prefix) + ph);
    if (cap)
        for (const char* ph : detail::kPhases) m.output_names.push_back(std::string("vc_") + ph);
    return m;
}

}  // namespace sercomp
