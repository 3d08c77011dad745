#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sercomp/cli/commands.hpp"
#include "support/oracles.hpp"

using namespace sercomp;
using namespace sercomp::cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json step_scenario(double n, double r, double dt, double duration) {
    return json{
        {"line", {{"r_series_ohm", r}}},
        {"compensation", {{"n_pu", n}}},
        {"initial_flow", {{"s_va", 360e6}, {"pf", 0.8}, {"pf_sign", "lagging"}}},
        {"events", json::array({{{"t_s", 0.1}, {"s_va", 480e6}, {"pf", 0.8}, {"pf_sign", "lagging"}}})},
        {"sim", {{"dt_s", dt}, {"duration_s", duration}}},
    };
}

std::vector<double> tail(const std::vector<double>& x, std::size_t from) {
    return {x.begin() + static_cast<std::ptrdiff_t>(from), x.end()};
}

// 1. Resonant frequency law on a low-loss line.
Outcome ssr_frequency_law() {
    const double r = 1.0;
    const double dt = 20e-6;
    std::string detail;
    bool pass = true;
    const auto t0 = std::chrono::steady_clock::now();
    for (const double n : {0.05, 0.15, 0.25}) {
        auto doc = step_scenario(n, r, dt, 1.0);
        doc["record"] = {"ia_dev"};
        const Config cfg = parse_config(doc);
        const auto& s = cfg.scenario;
        const double sigma = r / (2 * s.params.l_series);
        const double w_res = std::sqrt(n) * s.params.omega;
        const bool low_loss = sigma <= 0.05 * w_res;
        const SimResult res = run_scenario(s);
        const auto est = dominant_frequency(res.channel("ia_dev"), dt, TimeWindow{0.1, res.time.back()});
        const double want = std::sqrt(n) * 60.0;
        const double err = oracle::rel_err(est.peak_frequency, want);
        pass = pass && low_loss && err <= 0.02;
        detail += fmt("N=%.2f f=%.3f want=%.3f err=%.2f%% sigma/w_res=%.3f; ", n, est.peak_frequency, want,
                      100 * err, sigma / w_res);
    }
    const double elapsed = seconds_since(t0);
    pass = pass && elapsed < 30.0;
    return {pass, detail + fmt("runtime %.2f s (limit 30)", elapsed)};
}

LineParams lossless_line() {
    LineParams p;
    p.r_series = 0.0;
    return p;
}

double bus_amplitude() { return 345e3 * std::sqrt(2.0 / 3.0); }

// 2. Loadability gain.
Outcome loadability_gain_law() {
    const auto p = lossless_line();
    const double v = bus_amplitude();
    const auto bare = sweep_peak(p_delta_sweep(p, CompensationSpec::none(), v, 0.0, 179.0, 1791));
    std::string detail;
    bool pass = true;
    for (const double n : {0.05, 0.15, 0.25, 0.30}) {
        const auto comp = sweep_peak(p_delta_sweep(p, size_series_capacitor(n, p), v, 0.0, 179.0, 1791));
        const double ratio = comp.p / bare.p;
        const double err = oracle::rel_err(ratio, 1.0 / (1.0 - n));
        pass = pass && err <= 0.01;
        detail += fmt("N=%.2f ratio=%.5f err=%.3f%%; ", n, ratio, 100 * err);
    }
    LineParams lossy;
    const auto b8 = sweep_peak(p_delta_sweep(lossy, CompensationSpec::none(), v, 0.0, 179.0, 1791));
    const auto c8 = sweep_peak(p_delta_sweep(lossy, size_series_capacitor(0.25, lossy), v, 0.0, 179.0, 1791));
    return {pass, detail + fmt("(R=8.5 at N=0.25 for reference: %.4f)", c8.p / b8.p)};
}

// 3. Peak angle and peak power.
Outcome max_power_law() {
    const auto p = lossless_line();
    const double v = bus_amplitude();
    const double grid = 0.1;
    std::string detail;
    bool pass = true;
    for (const double n : {0.0, 0.25}) {
        const auto comp = n > 0 ? size_series_capacitor(n, p) : CompensationSpec::none();
        const auto rows = p_delta_sweep(p, comp, v, 0.0, 179.0, 1791);
        const auto peak = sweep_peak(rows);
        const double v_rms = v / std::sqrt(2.0);
        const double per_phase = v_rms * v_rms / (p.omega * p.l_series * (1.0 - n));
        const double err = oracle::rel_err(peak.p / 3.0, per_phase);
        const bool ok = std::abs(peak.delta_deg - 90.0) <= grid + 1e-9 && err <= 0.01;
        pass = pass && ok;
        detail += fmt("N=%.2f peak at %.1f deg, P/phase=%.6e want %.6e err=%.2e; ", n, peak.delta_deg,
                      peak.p / 3.0, per_phase, err);
    }
    return {pass, detail};
}

// 4. Transfer function against the state-space resolvent.
Outcome transfer_function_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    oracle::Gen g(401);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        LineParams p;
        p.r_series = g.uniform(0.1, 30.0);
        p.l_series = g.uniform(0.01, 1.0);
        p.omega = 2 * oracle::kPi * g.uniform(45.0, 65.0);
        const auto comp = size_series_capacitor(g.uniform(0.02, 0.9), p);
        const oracle::Complex s{g.uniform(-5.0, 5.0), 2 * oracle::kPi * g.log_uniform(0.1, 2000.0)};
        const auto tf = transfer_function_eval(p, comp, s);
        const auto m = reduced_model(p, comp);
        const Eigen::Matrix2cd want = oracle::resolvent_gain(m.a, m.b, s);
        Eigen::Matrix2cd got;
        got << tf.g_aa, tf.g_ab, tf.g_ba, tf.g_bb;
        worst = std::max(worst, (got - want).cwiseAbs().maxCoeff() / want.cwiseAbs().maxCoeff());
    }
    const double elapsed = seconds_since(t0);
    return {worst <= 1e-9 && elapsed < 1.0, fmt("max rel err %.3e (limit 1e-9), runtime %.3f s", worst, elapsed)};
}

// 5. Power derivatives against finite differences of simulated P, Q.
Outcome power_dynamics_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    oracle::Gen g(501);
    const double dt = 1e-5;
    double worst_scaled = 0.0;
    double worst_plain = 0.0;
    int done = 0;
    while (done < 100) {
        const double n = g.uniform(0.05, 0.7);
        auto doc = step_scenario(n, g.uniform(0.0, 20.0), dt, 0.04);
        doc["line"]["l_series_h"] = g.uniform(0.05, 0.5);
        // The power dynamics describe the reduced two-state line.
        doc["model"] = "reduced";
        doc["initial_flow"] = {{"s_va", g.uniform(50e6, 500e6)}, {"pf", g.uniform(0.7, 1.0)},
                               {"pf_sign", g.coin() ? "lagging" : "leading"}};
        doc["events"][0] = {{"t_s", 0.01}, {"s_va", g.uniform(50e6, 500e6)}, {"pf", g.uniform(0.7, 1.0)},
                            {"pf_sign", g.coin() ? "lagging" : "leading"}};
        doc["record"] = {"p", "q", "vr_alpha", "vr_beta"};
        const Config cfg = parse_config(doc);
        const auto& s = cfg.scenario;
        SimResult res;
        OperatingPoint op;
        try {
            op = solve_operating_point(LinePlant(s.model, s.params, s.comp), s.bus_amplitude(), s.initial_flow);
            res = run_scenario(s);
        } catch (const CapabilityError&) {
            continue;
        }
        const auto& ps = res.channel("p");
        const auto& qs = res.channel("q");
        const auto& vra = res.channel("vr_alpha");
        const auto& vrb = res.channel("vr_beta");
        const std::size_t k_event = res.index_at(0.01);
        const double w = s.params.omega;
        const double w_eff = std::abs(effective_coupling(s.params, s.comp));
        const double rl = s.params.r_series / s.params.l_series;
        const double kk = 1.5 / s.params.l_series;
        for (std::size_t k = 2; k + 2 < ps.size(); k += 3) {
            // The stencil must not straddle the input step.
            if (k + 2 >= k_event && k <= k_event + 2) continue;
            const double t = res.time[k];
            const AlphaBetaPair vs = AlphaBetaPair::from_complex(op.vs.to_complex() * std::polar(1.0, w * t));
            const BusVoltages bus{vs, {vra[k], vrb[k]}, {}};
            const PQ state{ps[k], qs[k]};
            const auto d = pq_derivatives(state, bus, s.params, s.comp);
            const double fd_p = oracle::derivative5(ps, k, dt);
            const double fd_q = oracle::derivative5(qs, k, dt);
            const double err = std::hypot(fd_p - d.dp, fd_q - d.dq);
            const double mag = std::hypot(d.dp, d.dq);
            const double scale =
                mag + std::hypot(state.p, state.q) * (w_eff + rl) + kk * vs.magnitude() * bus.delta().magnitude();
            worst_scaled = std::max(worst_scaled, err / scale);
            if (mag >= 0.01 * scale) worst_plain = std::max(worst_plain, err / mag);
        }
        ++done;
    }
    const double elapsed = seconds_since(t0);
    return {worst_scaled <= 1e-5 && elapsed < 60.0,
            fmt("max err / term scale %.3e (limit 1e-5), max plain rel err %.3e where |dPQ/dt| >= 1%% of scale, "
                "runtime %.2f s", worst_scaled,
                worst_plain, elapsed)};
}

// 6. Deadbeat commands reproduce the requested derivatives.
Outcome deadbeat_exactness() {
    oracle::Gen g(601);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        LineParams p;
        p.r_series = g.uniform(0.0, 20.0);
        p.l_series = g.uniform(0.05, 0.5);
        const auto comp = size_series_capacitor(g.uniform(0.05, 0.7), p);
        DpcConfig cfg;
        cfg.k_p = g.log_uniform(1.0, 1e3);
        cfg.k_q = g.log_uniform(1.0, 1e3);
        const BusVoltages bus{AlphaBetaPair::from_complex(g.complex_in_disk(3e5)),
                              AlphaBetaPair::from_complex(g.complex_in_disk(3e5)), {}};
        if (bus.vs.magnitude() < 1e3) continue;
        const PQ state{g.uniform(-1e9, 1e9), g.uniform(-1e9, 1e9)};
        const PQReference ref{g.uniform(-1e9, 1e9), g.uniform(-1e9, 1e9)};
        const auto u = deadbeat_command(state, ref, bus, p, comp, cfg);
        BusVoltages applied = bus;
        applied.vcon = u;
        const auto got = pq_derivatives(state, applied, p, comp);
        const PQRate want{cfg.k_p * (ref.p_ref - state.p), cfg.k_q * (ref.q_ref - state.q)};
        const double kk = 1.5 / p.l_series;
        const double vs = bus.vs.magnitude();
        const double scale = std::hypot(want.dp, want.dq) +
                             kk * vs * (vs + bus.vr.magnitude() + u.magnitude()) +
                             (std::abs(effective_coupling(p, comp)) + p.r_series / p.l_series) *
                                 std::hypot(state.p, state.q);
        worst = std::max(worst, std::hypot(got.dp - want.dp, got.dq - want.dq) / scale);
    }
    return {worst <= 1e-9, fmt("max rel err %.3e (limit 1e-9)", worst)};
}

// 7. Closed-loop damping of the resonant beat and settling.
Outcome dpc_damping() {
    const auto t0 = std::chrono::steady_clock::now();
    const double dt = 20e-6;
    const double t_event = 0.1;
    auto doc = step_scenario(0.25, 8.5, dt, 0.6);
    doc["record"] = {"p_dev", "p_delivered"};
    const Config open_cfg = parse_config(doc);
    doc["controller"] = {{"mode", "deadbeat"}};
    const Config closed_cfg = parse_config(doc);
    const SimResult open = run_scenario(open_cfg.scenario);
    const SimResult closed = run_scenario(closed_cfg.scenario);

    const TimeWindow post{t_event, open.time.back()};
    const double beat = dominant_frequency(open.channel("p_dev"), dt, post).peak_frequency;
    const std::size_t k0 = open.index_at(t_event);
    const double ratio = ssr_band_energy_ratio(tail(closed.channel("p_dev"), k0), tail(open.channel("p_dev"), k0), dt,
                                               beat, 5.0);

    const double k_p = closed_cfg.scenario.controller->k_p;
    const double t_settle = t_event + 5.0 / k_p;
    const auto& pd = closed.channel("p_delivered");
    double worst = 0.0;
    for (std::size_t k = closed.index_at(t_settle); k < pd.size(); ++k)
        worst = std::max(worst, std::abs(pd[k] - 384e6) / 384e6);
    const double elapsed = seconds_since(t0);
    const bool pass = ratio <= 0.1 && worst <= 0.01 && elapsed < 60.0;
    return {pass, fmt("beat %.2f Hz, band ratio %.3e (limit 0.1), max |P-384MW|/384MW after %.3f s = %.3e "
                      "(limit 0.01), runtime %.2f s",
                      beat, ratio, t_settle, worst, elapsed)};
}

// 8. Frequency and attenuation trend with compensation degree.
Outcome attenuation_trend() {
    const double dt = 20e-6;
    std::vector<double> f;
    std::vector<double> sigma;
    std::string detail;
    double theory = 0.0;
    for (const double n : {0.05, 0.15, 0.25}) {
        auto doc = step_scenario(n, 8.5, dt, 0.6);
        doc["record"] = {"ia_dev", "p_dev"};
        const Config cfg = parse_config(doc);
        const SimResult res = run_scenario(cfg.scenario);
        const auto m = measure_ssr(res, cfg.scenario);
        if (!m.current_hz || !m.decay_rate) return {false, fmt("N=%.2f: no measurable oscillation", n)};
        f.push_back(*m.current_hz);
        sigma.push_back(*m.decay_rate);
        theory = cfg.scenario.params.r_series / (2 * cfg.scenario.params.l_series);
        detail += fmt("N=%.2f f=%.3f Hz sigma=%.4f 1/s; ", n, f.back(), sigma.back());
    }
    const bool f_up = f[0] < f[1] && f[1] < f[2];
    const bool s_up = sigma[0] < sigma[1] && sigma[1] < sigma[2];
    return {f_up && s_up, detail + fmt("frequency increasing: %s, decay increasing: %s, lumped-model R/2L = %.4f",
                                       f_up ? "yes" : "no", s_up ? "yes" : "no", theory)};
}

// 9. Fourth-order convergence of the integrator.
Outcome integrator_order() {
    const auto run = [](double dt) {
        auto doc = step_scenario(0.25, 8.5, dt, 0.2);
        doc["record"] = {"ia"};
        return run_scenario(parse_config(doc).scenario);
    };
    const double dt = 1e-4;
    const SimResult ref = run(dt / 16);
    const SimResult coarse = run(dt);
    const SimResult fine = run(dt / 2);
    const auto error = [&](const SimResult& r, std::size_t stride) {
        double e = 0.0;
        const auto& x = r.channel("ia");
        const auto& y = ref.channel("ia");
        for (std::size_t k = 0; k * stride < x.size(); ++k)
            e = std::max(e, std::abs(x[k * stride] - y[k * stride * (16 / stride)]));
        return e;
    };
    const double e1 = error(coarse, 1);
    const double e2 = error(fine, 2);
    const double ratio = e1 / e2;
    return {ratio >= 12.0 && ratio <= 20.0, fmt("err(dt)=%.3e err(dt/2)=%.3e ratio %.3f (band [12, 20])", e1, e2, ratio)};
}

// 10. Byte-identical output across invocations.
Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "sercomp_acceptance_determinism";
    fs::remove_all(dir);
    const std::string cfg = std::string(SERCOMP_CONFIG_DIR) + "/step_response.json";
    std::ostringstream out;
    std::ostringstream err;
    const int a = cmd_simulate(cfg, dir / "a", out, err);
    const int b = cmd_simulate(cfg, dir / "b", out, err);
    if (a != 0 || b != 0) return {false, fmt("exit codes %d, %d: %s", a, b, err.str().c_str())};
    const std::string x = read_file(dir / "a" / "timeseries.csv");
    const std::string y = read_file(dir / "b" / "timeseries.csv");
    fs::remove_all(dir);
    return {x == y && !x.empty(), fmt("%zu bytes, identical: %s", x.size(), x == y ? "yes" : "no")};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"resonant frequency law", ssr_frequency_law},
        {"loadability gain", loadability_gain_law},
        {"peak power formula", max_power_law},
        {"transfer function equivalence", transfer_function_equivalence},
        {"power dynamics oracle", power_dynamics_oracle},
        {"deadbeat exactness", deadbeat_exactness},
        {"controller damping", dpc_damping},
        {"attenuation trend", attenuation_trend},
        {"integrator order", integrator_order},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("criterion %2zu %-30s %s  %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL",
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
