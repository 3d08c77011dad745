#pragma once

// Fixed-step simulation of the line plants with an optional DPC loop.
//
// Bus voltages are balanced positive-sequence sources rotating at the line
// frequency. A scenario starts in the sinusoidal steady state of its initial
// flow target and applies events at exact sample instants:
//   * uncontrolled: the receiving-bus phasor is re-solved for the new target
//     and stepped;
//   * controlled: the bus voltages stay fixed and the (p_ref, q_ref)
//     references step.
// The controller samples the plant at the start of each step; over that step
// the converter holds the command phasor, i.e. the command rotates with the
// buses from its sampled value.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sercomp/dpc.hpp"
#include "sercomp/errors.hpp"
#include "sercomp/line_models.hpp"
#include "sercomp/power.hpp"
#include "sercomp/transforms.hpp"

namespace sercomp {

namespace detail {
inline bool all_finite(double x) noexcept { return std::isfinite(x); }
template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
    return x.allFinite();
}
}  // namespace detail

/// Classical fourth-order Runge-Kutta step of x' = f(t, x).
template <class State, class Deriv>
State rk4_step(Deriv&& f, double t, const State& x, double dt) {
    if (!(dt > 0.0)) throw InvalidArgument("rk4_step: dt must be > 0");
    const auto checked = [t](State d) {
        if (!detail::all_finite(d)) throw DivergenceError("rk4_step: non-finite derivative", t);
        return d;
    };
    const double h2 = 0.5 * dt;
    const State k1 = checked(f(t, x));
    const State k2 = checked(f(t + h2, State(x + h2 * k1)));
    const State k3 = checked(f(t + h2, State(x + h2 * k2)));
    const State k4 = checked(f(t + dt, State(x + dt * k3)));
    return State(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

// ---------------------------------------------------------------------------
// Scenario description

enum class ModelKind { abc_rlc, split_pi, reduced };
enum class PfSign { lagging, leading };

/// Apparent power target at the sending bus, in the delivered convention
/// (positive P flows into the line). Lagging means positive delivered Q.
struct FlowTarget {
    double s_va = 0.0;
    double pf = 1.0;
    PfSign sign = PfSign::lagging;

    void validate(std::string_view where) const {
        if (!(s_va >= 0.0) || !std::isfinite(s_va))
            throw InvalidArgument(std::string(where) + ": apparent power must be >= 0");
        if (!(pf > 0.0 && pf <= 1.0))
            throw InvalidArgument(std::string(where) + ": power factor must lie in (0, 1]");
    }

    PQ delivered() const noexcept {
        const double q = s_va * std::sqrt(std::max(0.0, 1.0 - pf * pf));
        return {s_va * pf, sign == PfSign::lagging ? q : -q};
    }
    /// Same target expressed in the signed instantaneous-power convention.
    PQ signed_pq() const noexcept { return delivered().delivered(); }
};

struct Event {
    double t = 0.0;
    FlowTarget target;
};

struct Scenario {
    LineParams params;
    CompensationSpec comp;
    ModelKind model = ModelKind::abc_rlc;
    std::optional<DpcConfig> controller;
    double bus_voltage_ll_rms = 345e3;  // V
    FlowTarget initial_flow;
    std::vector<Event> events;
    double dt = 20e-6;
    double duration = 0.5;
    std::vector<std::string> record;

    /// Peak phase voltage of the buses.
    double bus_amplitude() const noexcept { return bus_voltage_ll_rms * std::sqrt(2.0 / 3.0); }

    std::size_t num_samples() const noexcept {
        return static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;
    }

    void validate() const;
};

inline constexpr std::string_view kChannelNames[] = {
    "ia",         "ib",        "ic",        "i_alpha",     "i_beta",      "vc_a",
    "vc_b",       "vc_c",      "p",         "q",           "p_delivered", "q_delivered",
    "vcon_alpha", "vcon_beta", "p_ref",     "q_ref",       "ia_dev",      "p_dev",
    "q_dev",      "vr_alpha",  "vr_beta",
};

/// Order matches kChannelNames.
enum class ChannelId {
    ia, ib, ic, i_alpha, i_beta, vc_a, vc_b, vc_c, p, q, p_delivered, q_delivered,
    vcon_alpha, vcon_beta, p_ref, q_ref, ia_dev, p_dev, q_dev, vr_alpha, vr_beta,
};

inline bool is_channel_name(std::string_view name) {
    return std::find(std::begin(kChannelNames), std::end(kChannelNames), name) !=
           std::end(kChannelNames);
}

inline ChannelId channel_id(std::string_view name) {
    const auto it = std::find(std::begin(kChannelNames), std::end(kChannelNames), name);
    if (it == std::end(kChannelNames))
        throw InvalidArgument("record: unknown channel " + std::string(name));
    return static_cast<ChannelId>(it - std::begin(kChannelNames));
}

inline void Scenario::validate() const {
    params.validate();
    comp.validate(params);
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("sim: dt must be > 0");
    if (!(duration >= dt) || !std::isfinite(duration))
        throw InvalidArgument("sim: duration must be >= dt");
    if (!(bus_voltage_ll_rms > 0.0))
        throw InvalidArgument("line: bus voltage must be > 0");
    initial_flow.validate("initial_flow");
    double last = -1.0;
    for (const auto& e : events) {
        if (!(e.t >= 0.0 && e.t <= duration))
            throw InvalidArgument("events: time must lie within [0, duration]");
        if (!(e.t > last)) throw InvalidArgument("events: times must be strictly increasing");
        last = e.t;
        e.target.validate("events");
    }
    if (model == ModelKind::reduced && !comp.compensated())
        throw InvalidArgument("model: reduced model requires n_pu > 0");
    if (model == ModelKind::split_pi && !(params.c_shunt_per_end > 0.0))
        throw InvalidArgument("model: split_pi requires c_shunt_per_end > 0");
    if (controller) {
        controller->validate();
        if (!comp.compensated())
            throw InvalidArgument("controller: DPC requires n_pu > 0");
    }
    for (const auto& r : record)
        if (!is_channel_name(r)) throw InvalidArgument("record: unknown channel " + r);
}

// ---------------------------------------------------------------------------
// Plant wrapper

/// Uniform view of the three plant descriptions: derivative, input mapping,
/// sending-end current and sinusoidal steady state.
class LinePlant {
public:
    LinePlant(ModelKind kind, const LineParams& params, const CompensationSpec& comp)
        : kind_(kind), params_(params), comp_(comp) {
        switch (kind) {
            case ModelKind::abc_rlc: {
                auto m = build_abc_plant(params, comp);
                a_ = m.a;
                b_ = m.b;
                c_ = m.c;
                break;
            }
            case ModelKind::split_pi: {
                auto m = build_split_pi(params, comp);
                a_ = m.a;
                b_ = m.b;
                c_ = m.c;
                break;
            }
            case ModelKind::reduced: {
                auto m = reduced_model(params, comp);
                a_ = m.a;
                b_ = m.b;
                c_ = Eigen::MatrixXd::Identity(2, 2);
                break;
            }
        }
    }

    ModelKind kind() const noexcept { return kind_; }
    const LineParams& params() const noexcept { return params_; }
    const CompensationSpec& comp() const noexcept { return comp_; }
    const Eigen::MatrixXd& a() const noexcept { return a_; }
    const Eigen::MatrixXd& b() const noexcept { return b_; }
    Eigen::Index state_dim() const noexcept { return a_.rows(); }

    Eigen::VectorXd derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
        return a_ * x + b_ * u;
    }

    /// Model input vector for the given instantaneous bus and converter voltages.
    Eigen::VectorXd inputs(const AlphaBetaPair& vs, const AlphaBetaPair& vr,
                           const AlphaBetaPair& vcon) const {
        Eigen::VectorXd u(b_.cols());
        switch (kind_) {
            case ModelKind::abc_rlc: {
                const auto v = inverse_clarke(vs - vr + vcon);
                u << v.a, v.b, v.c;
                break;
            }
            case ModelKind::split_pi: {
                const auto s = inverse_clarke(vs + vcon);
                const auto r = inverse_clarke(vr);
                u << s.a, s.b, s.c, r.a, r.b, r.c;
                break;
            }
            case ModelKind::reduced: {
                const auto v = vs - vr + vcon;
                u << v.alpha, v.beta;
                break;
            }
        }
        return u;
    }

    AlphaBetaPair sending_current(const Eigen::VectorXd& x) const {
        if (kind_ == ModelKind::reduced) return {x(0), x(1)};
        const Eigen::Vector3d i = c_.topRows(3) * x;
        return clarke({i(0), i(1), i(2)});
    }

    ThreePhaseSample sending_current_abc(const Eigen::VectorXd& x) const {
        if (kind_ == ModelKind::reduced) return inverse_clarke(sending_current(x));
        const Eigen::Vector3d i = c_.topRows(3) * x;
        return {i(0), i(1), i(2)};
    }

    /// Series capacitor voltages. The reduced model carries no capacitor state;
    /// its value is the quadrature relation v_c = -j i / (w C).
    ThreePhaseSample capacitor_voltage(const Eigen::VectorXd& x) const {
        if (!comp_.compensated()) return {};
        if (kind_ == ModelKind::reduced) {
            const Complex i(x(0), x(1));
            const Complex v = Complex(0.0, -1.0) * i / (params_.omega * comp_.c_series_total);
            return inverse_clarke(AlphaBetaPair::from_complex(v));
        }
        const Eigen::Vector3d v = c_.bottomRows(3) * x;
        return {v(0), v(1), v(2)};
    }

    /// Complex input phasors for balanced sources whose space vectors at t = 0
    /// are vs, vr and vcon.
    Eigen::VectorXcd input_phasors(Complex vs, Complex vr, Complex vcon) const {
        const Complex rot_b = std::polar(1.0, -2.0 * std::numbers::pi / 3.0);
        const Complex rot_c = std::conj(rot_b);
        Eigen::VectorXcd u(b_.cols());
        switch (kind_) {
            case ModelKind::abc_rlc: {
                const Complex v = vs - vr + vcon;
                u << v, v * rot_b, v * rot_c;
                break;
            }
            case ModelKind::split_pi: {
                const Complex s = vs + vcon;
                u << s, s * rot_b, s * rot_c, vr, vr * rot_b, vr * rot_c;
                break;
            }
            case ModelKind::reduced: {
                const Complex v = vs - vr + vcon;
                u << v, Complex(0.0, -1.0) * v;
                break;
            }
        }
        return u;
    }

    /// State phasor X of the sinusoidal steady state x(t) = Re(X e^{jwt}).
    Eigen::VectorXcd steady_state(Complex vs, Complex vr, Complex vcon) const {
        const Eigen::Index n = state_dim();
        Eigen::MatrixXcd m = Complex(0.0, params_.omega) * Eigen::MatrixXcd::Identity(n, n) -
                             a_.cast<Complex>();
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
        if (!(std::abs(lu.determinant()) > 0.0))
            throw PoleError("steady_state: synchronous frequency is a plant pole");
        return lu.solve(b_.cast<Complex>() * input_phasors(vs, vr, vcon));
    }

    Eigen::VectorXd state_at(const Eigen::VectorXcd& phasor, double t) const {
        const Complex rot = std::polar(1.0, params_.omega * t);
        return (phasor * rot).real();
    }

    /// Sending-end current space vector at t = 0 for the steady state.
    Complex steady_current(Complex vs, Complex vr, Complex vcon) const {
        return sending_current(state_at(steady_state(vs, vr, vcon), 0.0)).to_complex();
    }

private:
    ModelKind kind_;
    LineParams params_;
    CompensationSpec comp_;
    Eigen::MatrixXd a_;
    Eigen::MatrixXd b_;
    Eigen::MatrixXd c_;
};

// ---------------------------------------------------------------------------
// Operating points

/// Sinusoidal steady state. Voltages are space-vector snapshots at t = 0.
struct OperatingPoint {
    AlphaBetaPair vs;
    AlphaBetaPair vr;
    AlphaBetaPair vcon;
    Eigen::VectorXcd state_phasor;
    PQ pq;              // signed convention
    double delta = 0.0;  // rad, angle by which vs leads vr
};

namespace detail {

inline Complex current_for(const FlowTarget& target, Complex vs) {
    const PQ d = target.delivered();
    // S = 3/2 vs conj(i)  =>  i = conj(S / (3/2 vs))
    return std::conj(Complex(d.p, d.q) / (1.5 * vs));
}

inline void check_capability(const LinePlant& plant, double vs_mag, const FlowTarget& target) {
    const double x_eff = effective_reactance(plant.params(), plant.comp().n_pu);
    const double limit = 1.5 * max_power(vs_mag, vs_mag, x_eff);
    if (std::abs(target.delivered().p) >= limit) {
        throw CapabilityError("operating point: requested P exceeds the 90 degree transfer limit of " +
                                  std::to_string(limit) + " W",
                              limit);
    }
}

inline OperatingPoint finish(const LinePlant& plant, Complex vs, Complex vr, Complex vcon,
                             double vs_mag) {
    OperatingPoint op;
    op.vs = AlphaBetaPair::from_complex(vs);
    op.vr = AlphaBetaPair::from_complex(vr);
    op.vcon = AlphaBetaPair::from_complex(vcon);
    op.state_phasor = plant.steady_state(vs, vr, vcon);
    op.pq = instantaneous_pq(op.vs, plant.sending_current(plant.state_at(op.state_phasor, 0.0)));
    op.delta = std::arg(vs / vr);
    if (!(std::abs(op.delta) < 0.5 * std::numbers::pi)) {
        const double x_eff = effective_reactance(plant.params(), plant.comp().n_pu);
        throw CapabilityError("operating point: solution lies beyond the 90 degree angle limit",
                              1.5 * max_power(vs_mag, vs_mag, x_eff));
    }
    return op;
}

}  // namespace detail

/// Receiving-bus phasor realizing `target` with the sending bus at `vs_mag`
/// (peak phase volts, phase angle zero) and no converter injection.
///
/// The sending-end current is affine in the receiving-bus phasor, so magnitude
/// and angle of vr are found together in closed form.
inline OperatingPoint solve_operating_point(const LinePlant& plant, double vs_mag,
                                            const FlowTarget& target) {
    target.validate("operating point");
    if (!(vs_mag > 0.0)) throw InvalidArgument("operating point: bus voltage must be > 0");
    detail::check_capability(plant, vs_mag, target);
    const Complex vs = balanced_phasor(vs_mag, 0.0).to_complex();
    const Complex i_target = detail::current_for(target, vs);
    const Complex i_free = plant.steady_current(vs, 0.0, 0.0);
    const Complex gain = plant.steady_current(0.0, 1.0, 0.0);
    if (gain == Complex{}) throw PoleError("operating point: receiving bus has no influence");
    const Complex vr = (i_target - i_free) / gain;
    return detail::finish(plant, vs, vr, 0.0, vs_mag);
}

/// Converter injection realizing `target` with both bus phasors held.
inline OperatingPoint solve_injection(const LinePlant& plant, const AlphaBetaPair& vs_snap,
                                      const AlphaBetaPair& vr_snap, const FlowTarget& target) {
    target.validate("operating point");
    const double vs_mag = vs_snap.magnitude();
    detail::check_capability(plant, vs_mag, target);
    const Complex vs = vs_snap.to_complex();
    const Complex vr = vr_snap.to_complex();
    const Complex i_target = detail::current_for(target, vs);
    const Complex i_free = plant.steady_current(vs, vr, 0.0);
    const Complex gain = plant.steady_current(0.0, 0.0, 1.0);
    const Complex vcon = (i_target - i_free) / gain;
    return detail::finish(plant, vs, vr, vcon, vs_mag);
}

// ---------------------------------------------------------------------------
// Results

struct Channel {
    std::string name;
    std::vector<double> values;
};

struct SimResult {
    double dt = 0.0;
    double duration = 0.0;
    std::vector<double> time;
    std::vector<Channel> channels;
    std::string event_semantics;

    bool has(std::string_view name) const {
        return std::any_of(channels.begin(), channels.end(),
                           [&](const Channel& c) { return c.name == name; });
    }
    const std::vector<double>& channel(std::string_view name) const {
        for (const auto& c : channels)
            if (c.name == name) return c.values;
        throw InvalidArgument("SimResult: channel not recorded: " + std::string(name));
    }
    std::size_t size() const noexcept { return time.size(); }
    std::size_t index_at(double t) const noexcept {
        const double k = std::round(t / dt);
        return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(time.size() - 1)));
    }
};

inline constexpr std::string_view kUncontrolledSemantics =
    "uncontrolled: events re-solve the receiving-bus phasor and apply it as a step";
inline constexpr std::string_view kControlledSemantics =
    "controlled: events step the DPC power references; bus voltages stay fixed";

inline std::vector<std::string> default_channels() {
    return {std::begin(kChannelNames), std::end(kChannelNames)};
}

inline SimResult run_scenario(const Scenario& s) {
    s.validate();
    const LinePlant plant(s.model, s.params, s.comp);
    const double w = s.params.omega;
    const double vs_mag = s.bus_amplitude();
    const bool controlled = s.controller.has_value();

    OperatingPoint op = solve_operating_point(plant, vs_mag, s.initial_flow);
    const Complex vs0 = op.vs.to_complex();
    Complex vr0 = op.vr.to_complex();
    PQReference ref{op.pq.p, op.pq.q};

    std::optional<DpcController> ctrl;
    if (controlled) {
        DpcConfig cfg = *s.controller;
        if (cfg.vs_floor == 0.0) cfg.vs_floor = 0.01 * vs_mag;
        ctrl.emplace(cfg, s.params, s.comp);
    }

    const std::vector<std::string> names = s.record.empty() ? default_channels() : s.record;
    const std::size_t n = s.num_samples();
    SimResult result;
    result.dt = s.dt;
    result.duration = s.duration;
    result.event_semantics = std::string(controlled ? kControlledSemantics : kUncontrolledSemantics);
    result.time.reserve(n);
    result.channels.reserve(names.size());
    for (const auto& name : names) {
        result.channels.push_back({name, {}});
        result.channels.back().values.reserve(n);
    }

    std::vector<ChannelId> ids;
    for (const auto& name : names) ids.push_back(channel_id(name));

    std::vector<std::size_t> event_steps;
    for (const auto& e : s.events)
        event_steps.push_back(static_cast<std::size_t>(std::llround(e.t / s.dt)));
    std::size_t next_event = 0;

    Eigen::VectorXd x = plant.state_at(op.state_phasor, 0.0);
    AlphaBetaPair vcon{};

    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * s.dt;
        while (next_event < event_steps.size() && event_steps[next_event] <= k) {
            const FlowTarget& target = s.events[next_event].target;
            if (controlled) {
                op = solve_injection(plant, op.vs, op.vr, target);
                ref = {op.pq.p, op.pq.q};
            } else {
                op = solve_operating_point(plant, vs_mag, target);
                vr0 = op.vr.to_complex();
            }
            ++next_event;
        }

        const Complex rot = std::polar(1.0, w * t);
        const auto vs_t = AlphaBetaPair::from_complex(vs0 * rot);
        const auto vr_t = AlphaBetaPair::from_complex(vr0 * rot);
        const AlphaBetaPair i_ab = plant.sending_current(x);
        const PQ pq = instantaneous_pq(vs_t, i_ab);
        if (ctrl) vcon = ctrl->step(pq, ref, vs_t, vr_t, s.dt);

        result.time.push_back(t);
        const auto i_abc = plant.sending_current_abc(x);
        for (std::size_t c = 0; c < result.channels.size(); ++c) {
            double v = 0.0;
            switch (ids[c]) {
                case ChannelId::ia: v = i_abc.a; break;
                case ChannelId::ib: v = i_abc.b; break;
                case ChannelId::ic: v = i_abc.c; break;
                case ChannelId::i_alpha: v = i_ab.alpha; break;
                case ChannelId::i_beta: v = i_ab.beta; break;
                case ChannelId::vc_a: v = plant.capacitor_voltage(x).a; break;
                case ChannelId::vc_b: v = plant.capacitor_voltage(x).b; break;
                case ChannelId::vc_c: v = plant.capacitor_voltage(x).c; break;
                case ChannelId::p: v = pq.p; break;
                case ChannelId::q: v = pq.q; break;
                case ChannelId::p_delivered: v = -pq.p; break;
                case ChannelId::q_delivered: v = -pq.q; break;
                case ChannelId::vcon_alpha: v = vcon.alpha; break;
                case ChannelId::vcon_beta: v = vcon.beta; break;
                case ChannelId::p_ref: v = controlled ? ref.p_ref : op.pq.p; break;
                case ChannelId::q_ref: v = controlled ? ref.q_ref : op.pq.q; break;
                case ChannelId::ia_dev:
                    v = i_abc.a - plant.sending_current_abc(plant.state_at(op.state_phasor, t)).a;
                    break;
                case ChannelId::p_dev: v = pq.p - op.pq.p; break;
                case ChannelId::q_dev: v = pq.q - op.pq.q; break;
                case ChannelId::vr_alpha: v = vr_t.alpha; break;
                case ChannelId::vr_beta: v = vr_t.beta; break;
            }
            result.channels[c].values.push_back(v);
        }

        if (k + 1 == n) break;
        const auto f = [&](double tau, const Eigen::VectorXd& xs) -> Eigen::VectorXd {
            const Complex r = std::polar(1.0, w * tau);
            // The converter holds its phasor, so the command rotates with the buses.
            const Complex hold = std::polar(1.0, w * (tau - t));
            return plant.derivative(
                xs, plant.inputs(AlphaBetaPair::from_complex(vs0 * r),
                                 AlphaBetaPair::from_complex(vr0 * r),
                                 AlphaBetaPair::from_complex(vcon.to_complex() * hold)));
        };
        x = rk4_step(f, t, x, s.dt);
        if (!x.allFinite()) throw DivergenceError("run_scenario: state diverged", t + s.dt);
    }
    return result;
}

}  // namespace sercomp
