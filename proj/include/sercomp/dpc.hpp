#pragma once

// Direct power control of the series-injected converter voltage.
//
// Both laws exploit the affine dependence of (dP/dt, dQ/dt) on vcon: a desired
// derivative pair is turned into a converter voltage by cancelling the natural
// drift and inverting the 2x2 power Jacobian.
//   deadbeat: desired = (k_p (p_ref - P), k_q (q_ref - Q))
//   sliding:  desired = -smc_gain sat(s / boundary_layer), s = (P - p_ref, Q - q_ref)

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "sercomp/errors.hpp"
#include "sercomp/line_models.hpp"
#include "sercomp/power.hpp"
#include "sercomp/transforms.hpp"

namespace sercomp {

enum class DpcMode { deadbeat, sliding };

struct DpcConfig {
    DpcMode mode = DpcMode::deadbeat;
    double k_p = 50.0;              // 1/s
    double k_q = 50.0;              // 1/s
    double smc_gain = 5e9;          // W/s (and var/s), derivative authority
    double boundary_layer = 1e8;    // W (and var)
    double v_max = 7e4;             // V, injection magnitude limit
    double ramp_max = 5e7;          // V/s per alpha-beta channel
    double vs_floor = 0.0;          // V; |vs| at or below this is singular

    void validate() const {
        if (!(k_p > 0.0)) throw InvalidArgument("controller: k_p must be > 0");
        if (!(k_q > 0.0)) throw InvalidArgument("controller: k_q must be > 0");
        if (!(smc_gain >= 0.0)) throw InvalidArgument("controller: smc_gain must be >= 0");
        if (!(boundary_layer > 0.0))
            throw InvalidArgument("controller: boundary_layer must be > 0");
        if (!(v_max > 0.0)) throw InvalidArgument("controller: v_max must be > 0");
        if (!(ramp_max > 0.0)) throw InvalidArgument("controller: ramp_max must be > 0");
        if (!(vs_floor >= 0.0)) throw InvalidArgument("controller: vs_floor must be >= 0");
    }
};

struct PQReference {
    double p_ref = 0.0;  // W, same sign convention as PQ
    double q_ref = 0.0;  // var
};

/// Converter voltage that makes the reduced power dynamics equal `desired`.
/// `bus.vcon` is ignored.
inline AlphaBetaPair invert_power_dynamics(const PQ& state, const PQRate& desired,
                                           const BusVoltages& bus, const LineParams& params,
                                           const CompensationSpec& comp, double vs_floor) {
    const double vs_mag = bus.vs.magnitude();
    if (!(vs_mag > vs_floor) || vs_mag == 0.0)
        throw SingularityError("dpc: sending-bus voltage at or below the singularity floor");
    BusVoltages free = bus;
    free.vcon = {};
    const PQRate drift = pq_derivatives(state, free, params, comp);
    const Eigen::Vector2d rhs(desired.dp - drift.dp, desired.dq - drift.dq);
    // The Jacobian is -(3/2L) times a scaled reflection, so its inverse is explicit.
    const double k = 1.5 / params.l_series;
    const double m2 = vs_mag * vs_mag;
    const auto& vs = bus.vs;
    return {-(vs.alpha * rhs.x() + vs.beta * rhs.y()) / (k * m2),
            -(vs.beta * rhs.x() - vs.alpha * rhs.y()) / (k * m2)};
}

inline AlphaBetaPair deadbeat_command(const PQ& state, const PQReference& ref,
                                      const BusVoltages& bus, const LineParams& params,
                                      const CompensationSpec& comp, const DpcConfig& cfg) {
    const PQRate desired{cfg.k_p * (ref.p_ref - state.p), cfg.k_q * (ref.q_ref - state.q)};
    return invert_power_dynamics(state, desired, bus, params, comp, cfg.vs_floor);
}

inline double saturate(double x) noexcept { return std::clamp(x, -1.0, 1.0); }

inline AlphaBetaPair sliding_command(const PQ& state, const PQReference& ref,
                                     const BusVoltages& bus, const LineParams& params,
                                     const CompensationSpec& comp, const DpcConfig& cfg) {
    const double s_p = state.p - ref.p_ref;
    const double s_q = state.q - ref.q_ref;
    const PQRate desired{-cfg.smc_gain * saturate(s_p / cfg.boundary_layer),
                         -cfg.smc_gain * saturate(s_q / cfg.boundary_layer)};
    return invert_power_dynamics(state, desired, bus, params, comp, cfg.vs_floor);
}

/// Magnitude clamp, then slew clamp.
///
/// The magnitude clamp scales radially to v_max. The slew clamp shortens the
/// step from `prev` uniformly until every channel satisfies
/// |out - prev| <= ramp_max dt; with `prev` inside the v_max disk the result
/// stays inside it, so both limits hold and the operation is idempotent.
inline AlphaBetaPair apply_limits(const AlphaBetaPair& cmd, const AlphaBetaPair& prev,
                                  double dt, const DpcConfig& cfg) {
    if (!(dt > 0.0)) throw InvalidArgument("apply_limits: dt must be > 0");
    AlphaBetaPair out = cmd;
    const double mag = out.magnitude();
    if (mag > cfg.v_max) out = (cfg.v_max / mag) * out;

    const double step = cfg.ramp_max * dt;
    const AlphaBetaPair d = out - prev;
    const double worst = std::max(std::abs(d.alpha), std::abs(d.beta));
    if (worst > step) out = prev + (step / worst) * d;

    // Only reachable when prev itself lies outside the disk.
    const double mag2 = out.magnitude();
    if (mag2 > cfg.v_max) out = (cfg.v_max / mag2) * out;
    return out;
}

/// Stateful wrapper used inside the simulation loop: selects the law and
/// remembers the last applied command for slew limiting.
class DpcController {
public:
    DpcController(DpcConfig cfg, LineParams params, CompensationSpec comp)
        : cfg_(cfg), params_(params), comp_(comp) {
        cfg_.validate();
        if (!comp_.compensated())
            throw InvalidArgument("dpc: the power dynamics require n_pu > 0");
    }

    AlphaBetaPair step(const PQ& measured, const PQReference& ref, const AlphaBetaPair& vs,
                       const AlphaBetaPair& vr, double dt) {
        const BusVoltages bus{vs, vr, {}};
        const AlphaBetaPair raw = cfg_.mode == DpcMode::deadbeat
                                      ? deadbeat_command(measured, ref, bus, params_, comp_, cfg_)
                                      : sliding_command(measured, ref, bus, params_, comp_, cfg_);
        prev_ = apply_limits(raw, prev_, dt, cfg_);
        return prev_;
    }

    const AlphaBetaPair& last_command() const noexcept { return prev_; }
    void reset(AlphaBetaPair cmd = {}) noexcept { prev_ = cmd; }
    const DpcConfig& config() const noexcept { return cfg_; }

private:
    DpcConfig cfg_;
    LineParams params_;
    CompensationSpec comp_;
    AlphaBetaPair prev_{};
};

}  // namespace sercomp
