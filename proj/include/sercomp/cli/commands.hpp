#pragma once

// Command implementations behind the `sercomp` executable. Each command
// returns a process exit code:
//   0 success, 1 configuration or usage error, 2 simulation divergence,
//   3 infeasible operating point.
// Every output directory receives a manifest.json describing the run.

#include <algorithm>
#include <cmath>
#include <complex>
#include <exception>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sercomp/analysis.hpp"
#include "sercomp/cli/config.hpp"
#include "sercomp/cli/io.hpp"
#include "sercomp/errors.hpp"
#include "sercomp/line_models.hpp"
#include "sercomp/sim_engine.hpp"

#ifndef SERCOMP_VERSION
#define SERCOMP_VERSION "0.0.0"
#endif

namespace sercomp::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kConfigError = 1, kDivergence = 2, kInfeasible = 3 };

/// Maps the active exception onto an exit code and reports it on `err`.
inline int report_failure(std::exception_ptr ep, std::ostream& err) {
    try {
        std::rethrow_exception(ep);
    } catch (const DivergenceError& e) {
        err << "error: simulation diverged at t = " << e.time() << " s: " << e.what() << '\n';
        return kDivergence;
    } catch (const CapabilityError& e) {
        err << "error: infeasible operating point (limit " << e.limit() << " W): " << e.what()
            << '\n';
        return kInfeasible;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (...) {
        err << "error: unknown failure\n";
        return kConfigError;
    }
}

/// Runs `body` and converts any exception into an exit code.
inline int guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (...) {
        return report_failure(std::current_exception(), err);
    }
}

inline json interpretation_json() {
    return json{
        {"clarke", "amplitude-invariant (2/3); beta = -|V| cos(wt) for a = |V| sin(wt)"},
        {"compensation_sizing", "total series capacitance realizes X_C = N X_L, C = 1/(N w^2 L)"},
        {"power_sign",
         "p, q carry the leading minus (power leaving the sending bus is negative); "
         "p_delivered, q_delivered are the negated values"},
        {"power_dynamics", "w_eff = w - 1/(w L C); dot/cross-product brackets"},
        {"event_semantics_uncontrolled", std::string(kUncontrolledSemantics)},
        {"event_semantics_controlled", std::string(kControlledSemantics)},
        {"split_pi_topology",
         "two half-line pi sections, series capacitor at midline, end shunts across the buses"},
        {"controller_timing", "sample at step start, command held over the step"},
    };
}

inline json make_manifest(const std::string& command, const Config* cfg, json extra = json::object()) {
    json m;
    m["tool"] = "sercomp";
    m["version"] = SERCOMP_VERSION;
    m["command"] = command;
    if (cfg) {
        m["config_digest"] = "sha256:" + sha256_hex(cfg->source.dump());
        m["resolved_config"] = cfg->resolved;
    }
    m["defaults"] = defaults_json();
    m["controller_defaults"] = controller_defaults_json();
    m["interpretation"] = interpretation_json();
    for (auto& [k, v] : extra.items()) m[k] = v;
    return m;
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
}

inline void write_json(const fs::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// SSR measurements shared by simulate and ssr-sweep

struct SsrMeasurement {
    std::optional<double> current_hz;
    std::optional<double> power_hz;
    std::optional<double> decay_rate;
    TimeWindow window;
};

/// Measures the post-event oscillation on the deviation channels of `r`.
/// Measurements that cannot be made (no signal, too few cycles) stay empty.
inline SsrMeasurement measure_ssr(const SimResult& r, const Scenario& s) {
    SsrMeasurement m;
    const double t0 = s.events.empty() ? 0.0 : s.events.back().t;
    m.window = {t0, r.time.back()};
    const auto try_measure = [](auto&& f) -> std::optional<double> {
        try {
            return f();
        } catch (const NoSignalError&) {
        } catch (const InsufficientCyclesError&) {
        } catch (const InvalidArgument&) {
        }
        return std::nullopt;
    };
    const auto& ia = r.channel("ia_dev");
    const auto& p = r.channel("p_dev");
    m.current_hz = try_measure([&] { return dominant_frequency(ia, r.dt, m.window).peak_frequency; });
    m.power_hz = try_measure([&] { return dominant_frequency(p, r.dt, m.window).peak_frequency; });
    m.decay_rate = try_measure([&] { return damping_estimate(ia, r.dt, m.window); });
    return m;
}

inline json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

/// Time after the last event from which p stays within 1 % of its final
/// reference; empty when it never settles inside the record.
inline std::optional<double> settling_time(const SimResult& r, const Scenario& s) {
    const auto& p = r.channel("p");
    const auto& ref = r.channel("p_ref");
    const double t_event = s.events.empty() ? 0.0 : s.events.back().t;
    const double target = ref.back();
    const double tol = 0.01 * std::max(std::abs(target), 1.0);
    std::size_t k = p.size();
    while (k > 0 && std::abs(p[k - 1] - target) <= tol) --k;
    if (k == p.size()) return std::nullopt;
    const double t = r.time[std::min(k, p.size() - 1)];
    return std::max(0.0, t - t_event);
}

inline Scenario with_analysis_channels(Scenario s) {
    for (const char* name : {"p", "q", "p_ref", "q_ref", "ia_dev", "p_dev"})
        if (std::find(s.record.begin(), s.record.end(), name) == s.record.end())
            s.record.emplace_back(name);
    return s;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_simulate(const std::string& config_path, const fs::path& out_dir,
                        std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return guarded(
        [&] {
            const Config cfg = load_config(config_path);
            const Scenario& s = cfg.scenario;
            const SimResult r = run_scenario(with_analysis_channels(s));
            ensure_dir(out_dir);

            Table t;
            t.header.push_back("time_s");
            t.columns.push_back(r.time);
            for (const auto& name : s.record) {
                t.header.push_back(name);
                t.columns.push_back(r.channel(name));
            }

            const SsrMeasurement m = measure_ssr(r, s);
            const double f0 = s.params.frequency_hz();
            json summary;
            summary["samples"] = r.size();
            summary["event_semantics"] = r.event_semantics;
            summary["final"] = {{"p_w", r.channel("p").back()},
                                {"q_var", r.channel("q").back()},
                                {"p_delivered_w", -r.channel("p").back()},
                                {"q_delivered_var", -r.channel("q").back()},
                                {"p_ref_w", r.channel("p_ref").back()},
                                {"q_ref_var", r.channel("q_ref").back()}};
            summary["settling_time_s"] = optional_json(settling_time(r, s));
            summary["ssr"] = {
                {"window_s", {m.window.t0, m.window.t1}},
                {"predicted_frequency_hz", ssr_frequency(s.comp.n_pu, f0)},
                {"current_frequency_hz", optional_json(m.current_hz)},
                {"power_frequency_hz", optional_json(m.power_hz)},
                {"decay_rate_1_per_s", optional_json(m.decay_rate)},
            };

            write_atomic(out_dir / "timeseries.csv", t.to_csv());
            write_json(out_dir / "summary.json", summary);
            write_json(out_dir / "manifest.json",
                       make_manifest("simulate", &cfg,
                                     {{"outputs", {"timeseries.csv", "summary.json"}},
                                      {"event_semantics", r.event_semantics}}));
            out << "wrote " << (out_dir / "timeseries.csv").string() << " (" << r.size()
                << " samples)\n";
            return int{kOk};
        },
        err);
}

/// Parses "0.05,0.15,0.25".
inline std::vector<double> parse_list(const std::string& text) {
    std::vector<double> values;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string cell =
            text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!cell.empty()) values.push_back(parse_double(cell));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return values;
}

struct SweepRow {
    double n = 0.0;
    double predicted = 0.0;
    SsrMeasurement m;
};

inline int cmd_ssr_sweep(const std::string& config_path, const std::vector<double>& n_list,
                         const fs::path& out_dir, std::ostream& out = std::cout,
                         std::ostream& err = std::cerr) {
    return guarded(
        [&] {
            if (n_list.empty()) throw ConfigError("n", "empty compensation list");
            for (double n : n_list)
                if (!(n > 0.0 && n < 1.0)) throw ConfigError("n", "each value must lie in (0, 1)");
            const Config cfg = load_config(config_path);
            if (cfg.scenario.events.empty())
                throw ConfigError("events", "ssr-sweep needs at least one event to excite the line");

            // Rows are independent; run them concurrently and collect in input order.
            std::vector<std::future<SweepRow>> jobs;
            for (double n : n_list) {
                jobs.push_back(std::async(std::launch::async, [&cfg, n] {
                    Scenario s = cfg.scenario;
                    s.comp = size_series_capacitor(n, s.params, s.comp.num_segments);
                    s.controller.reset();
                    s.record = {"ia_dev", "p_dev"};
                    const SimResult r = run_scenario(s);
                    return SweepRow{n, ssr_frequency(n, s.params.frequency_hz()), measure_ssr(r, s)};
                }));
            }
            std::vector<SweepRow> rows;
            std::exception_ptr failure;
            for (auto& j : jobs) {
                try {
                    rows.push_back(j.get());
                } catch (...) {
                    if (!failure) failure = std::current_exception();
                }
            }
            if (failure) {
                // Never leave an earlier sweep behind as if it belonged to this run.
                std::error_code ec;
                fs::remove(out_dir / "ssr_sweep.csv", ec);
                std::rethrow_exception(failure);
            }

            const double nan = std::nan("");
            Table t;
            t.header = {"n_pu", "f_predicted_hz", "f_measured_current_hz", "f_measured_power_hz",
                        "decay_rate_1_per_s"};
            t.columns.resize(5);
            for (const auto& row : rows) {
                t.columns[0].push_back(row.n);
                t.columns[1].push_back(row.predicted);
                t.columns[2].push_back(row.m.current_hz.value_or(nan));
                t.columns[3].push_back(row.m.power_hz.value_or(nan));
                t.columns[4].push_back(row.m.decay_rate.value_or(nan));
            }
            ensure_dir(out_dir);
            write_atomic(out_dir / "ssr_sweep.csv", t.to_csv());
            write_json(out_dir / "manifest.json",
                       make_manifest("ssr-sweep", &cfg,
                                     {{"outputs", {"ssr_sweep.csv"}},
                                      {"n_list", n_list},
                                      {"channels",
                                       {{"f_measured_current_hz", "ia_dev (phase-a current minus steady state)"},
                                        {"f_measured_power_hz", "p_dev (P minus steady state)"},
                                        {"decay_rate_1_per_s", "ia_dev envelope"}}}}));
            out << "wrote " << (out_dir / "ssr_sweep.csv").string() << " (" << rows.size()
                << " rows)\n";
            return int{kOk};
        },
        err);
}

inline int cmd_bode(const std::string& config_path, double f_min, double f_max, int points,
                    const fs::path& out_dir, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    return guarded(
        [&] {
            if (!(f_min > 0.0)) throw ConfigError("fmin", "must be > 0");
            if (!(f_max > f_min)) throw ConfigError("fmax", "must exceed fmin");
            if (points < 2) throw ConfigError("points", "must be >= 2");
            const Config cfg = load_config(config_path);
            const Scenario& s = cfg.scenario;
            if (!s.comp.compensated())
                throw ConfigError("compensation.n_pu", "bode needs n_pu > 0");

            Table t;
            t.header = {"f_hz", "g_aa_mag", "g_aa_phase_deg", "g_ab_mag", "g_ab_phase_deg"};
            t.columns.resize(5);
            const double ratio = f_max / f_min;
            for (int k = 0; k < points; ++k) {
                const double f = k + 1 == points
                                     ? f_max
                                     : f_min * std::pow(ratio, static_cast<double>(k) / (points - 1));
                const auto g = transfer_function_eval(s.params, s.comp,
                                                      Complex(0.0, 2.0 * std::numbers::pi * f));
                t.columns[0].push_back(f);
                t.columns[1].push_back(std::abs(g.g_aa));
                t.columns[2].push_back(std::arg(g.g_aa) * 180.0 / std::numbers::pi);
                t.columns[3].push_back(std::abs(g.g_ab));
                t.columns[4].push_back(std::arg(g.g_ab) * 180.0 / std::numbers::pi);
            }
            ensure_dir(out_dir);
            write_atomic(out_dir / "bode.csv", t.to_csv());
            write_json(out_dir / "manifest.json",
                       make_manifest("bode", &cfg,
                                     {{"outputs", {"bode.csv"}},
                                      {"columns_note",
                                       "g_bb equals g_aa and g_ba equals -g_ab identically; "
                                       "each pair is emitted once"}}));
            out << "wrote " << (out_dir / "bode.csv").string() << '\n';
            return int{kOk};
        },
        err);
}

struct DesignOverrides {
    std::optional<double> r_ohm;
    std::optional<double> l_h;
    std::optional<double> f_hz;
    std::optional<int> segments;
};

inline int cmd_design(double n, const DesignOverrides& overrides, const std::optional<fs::path>& out_dir,
                      std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return guarded(
        [&] {
            if (!(n > 0.0 && n < 1.0)) throw ConfigError("n", "must lie in (0, 1)");
            const json d = defaults_json();
            LineParams params;
            params.r_series = overrides.r_ohm.value_or(d["line"]["r_series_ohm"].get<double>());
            params.l_series = overrides.l_h.value_or(d["line"]["l_series_h"].get<double>());
            const double f0 = overrides.f_hz.value_or(d["line"]["frequency_hz"].get<double>());
            if (!(f0 > 0.0)) throw ConfigError("f-hz", "must be > 0");
            params.omega = 2.0 * std::numbers::pi * f0;
            if (!(params.l_series > 0.0)) throw ConfigError("l-h", "must be > 0");
            if (!(params.r_series >= 0.0)) throw ConfigError("r-ohm", "must be >= 0");
            const int segments = overrides.segments.value_or(d["compensation"]["num_segments"].get<int>());
            if (segments < 1) throw ConfigError("segments", "must be >= 1");

            const CompensationSpec comp = size_series_capacitor(n, params, segments);
            json j;
            j["n_pu"] = n;
            j["r_series_ohm"] = params.r_series;
            j["l_series_h"] = params.l_series;
            j["frequency_hz"] = f0;
            j["num_segments"] = segments;
            j["c_series_total_f"] = comp.c_series_total;
            j["c_per_segment_f"] = comp.per_segment_capacitance();
            j["x_l_ohm"] = params.reactance();
            j["x_c_ohm"] = comp.reactance(params.omega);
            j["x_eff_ohm"] = effective_reactance(params, n);
            j["f_res_hz"] = ssr_frequency(n, f0);
            j["loadability_gain"] = loadability_gain(n);
            j["warning"] = n > 0.30;
            if (n > 0.30)
                j["warning_text"] = "compensation above 30 % exceeds typical practical installations";
            j["manifest"] = make_manifest("design", nullptr);
            out << j.dump(2) << '\n';
            const fs::path dir = out_dir.value_or(fs::path("."));
            ensure_dir(dir);
            write_json(dir / "design.json", j);
            return int{kOk};
        },
        err);
}

inline int cmd_pdelta(const std::string& config_path, const fs::path& out_dir,
                      std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return guarded(
        [&] {
            const Config cfg = load_config(config_path);
            const Scenario& s = cfg.scenario;
            const auto& pd = cfg.pdelta;
            const double v = s.bus_amplitude();
            const auto comp_rows =
                p_delta_sweep(s.params, s.comp, v, pd.delta_min_deg, pd.delta_max_deg, pd.steps);
            const auto bare_rows = p_delta_sweep(s.params, CompensationSpec::none(), v,
                                                 pd.delta_min_deg, pd.delta_max_deg, pd.steps);
            Table t;
            t.header = {"delta_deg", "p_w_comp", "q_var_comp", "p_w_uncomp", "q_var_uncomp"};
            t.columns.resize(5);
            for (std::size_t k = 0; k < comp_rows.size(); ++k) {
                t.columns[0].push_back(comp_rows[k].delta_deg);
                t.columns[1].push_back(comp_rows[k].p);
                t.columns[2].push_back(comp_rows[k].q);
                t.columns[3].push_back(bare_rows[k].p);
                t.columns[4].push_back(bare_rows[k].q);
            }
            ensure_dir(out_dir);
            write_atomic(out_dir / "pdelta.csv", t.to_csv());
            const double peak_ratio = sweep_peak(comp_rows).p / sweep_peak(bare_rows).p;
            write_json(out_dir / "manifest.json",
                       make_manifest("pdelta", &cfg,
                                     {{"outputs", {"pdelta.csv"}},
                                      {"power_convention", "delivered (positive into the line)"},
                                      {"peak_ratio", peak_ratio},
                                      {"loadability_gain", loadability_gain(s.comp.n_pu)}}));
            out << "wrote " << (out_dir / "pdelta.csv").string() << " (peak ratio " << peak_ratio
                << ")\n";
            return int{kOk};
        },
        err);
}

}  // namespace sercomp::cli
