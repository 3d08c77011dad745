#pragma once

// Scenario configuration files.
//
// A config is one JSON document with the top-level keys
//   line, compensation, model, controller, initial_flow, events, sim, record,
//   pdelta, analysis
// All physical quantities are SI with unit-suffixed key names. Every key is
// optional; missing keys take the values of `defaults_json()`. Unknown keys
// are rejected so that typos surface as errors.

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sercomp/errors.hpp"
#include "sercomp/line_models.hpp"
#include "sercomp/sim_engine.hpp"

namespace sercomp::cli {

using json = nlohmann::json;

/// Bad configuration. `key()` is the dotted path of the offending entry.
class ConfigError : public Error {
public:
    ConfigError(const std::string& key, const std::string& message)
        : Error(key + ": " + message), key_(key) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

struct PDeltaSettings {
    double delta_min_deg = 0.0;
    double delta_max_deg = 179.0;
    std::size_t steps = 180;
};

struct AnalysisSettings {
    double ssr_half_bandwidth_hz = 5.0;
};

struct Config {
    Scenario scenario;
    PDeltaSettings pdelta;
    AnalysisSettings analysis;
    json source;    // document as read
    json resolved;  // document with every default filled in
};

/// Defaults for every key. None of these values is measured data: they
/// describe a representative 345 kV, 250 km line.
inline json defaults_json() {
    return json{
        {"line",
         {{"r_series_ohm", 8.5},
          {"l_series_h", 0.25},
          {"frequency_hz", 60.0},
          {"c_shunt_per_end_f", 1.1e-6},
          {"voltage_ll_rms_v", 345e3}}},
        {"compensation", {{"n_pu", 0.25}, {"num_segments", 1}}},
        {"model", "abc_rlc"},
        {"controller", nullptr},
        {"initial_flow", {{"s_va", 360e6}, {"pf", 0.8}, {"pf_sign", "lagging"}}},
        {"events", json::array()},
        {"sim", {{"dt_s", 20e-6}, {"duration_s", 0.5}}},
        {"record", default_channels()},
        {"pdelta", {{"delta_min_deg", 0.0}, {"delta_max_deg", 179.0}, {"steps", 180}}},
        {"analysis", {{"ssr_half_bandwidth_hz", 5.0}}},
    };
}

/// Defaults of the DPC block, applied key by key when `controller` is an object.
inline json controller_defaults_json() {
    const DpcConfig d;
    return json{{"mode", "deadbeat"},
                {"k_p_per_s", d.k_p},
                {"k_q_per_s", d.k_q},
                {"smc_gain_w_per_s", d.smc_gain},
                {"boundary_layer_w", d.boundary_layer},
                {"v_max_v", d.v_max},
                {"ramp_max_v_per_s", d.ramp_max}};
}

namespace detail {

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(path, "expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items())
        if (!ok.contains(k)) throw ConfigError(path.empty() ? k : path + "." + k, "unknown key");
}

/// Fills missing object members from `defaults`, recursively for objects.
inline json merged(const json& defaults, const json& given) {
    if (!defaults.is_object() || !given.is_object()) return given;
    json out = defaults;
    for (const auto& [k, v] : given.items())
        out[k] = out.contains(k) ? merged(out[k], v) : v;
    return out;
}

inline const json& member(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) throw ConfigError(path + "." + key, "missing");
    return obj[key];
}

inline double number(const json& obj, const std::string& path, const char* key) {
    const std::string where = path + "." + key;
    const auto& v = member(obj, path, key);
    if (!v.is_number()) throw ConfigError(where, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where, "must be finite");
    return x;
}

inline std::string text(const json& obj, const std::string& path, const char* key) {
    const auto& v = member(obj, path, key);
    if (!v.is_string()) throw ConfigError(path + "." + key, "expected a string");
    return v.get<std::string>();
}

inline long long integer(const json& obj, const std::string& path, const char* key) {
    const auto& v = member(obj, path, key);
    if (!v.is_number_integer()) throw ConfigError(path + "." + key, "expected an integer");
    return v.get<long long>();
}

inline PfSign pf_sign(const json& obj, const std::string& path) {
    const std::string s = text(obj, path, "pf_sign");
    if (s == "lagging") return PfSign::lagging;
    if (s == "leading") return PfSign::leading;
    throw ConfigError(path + ".pf_sign", "expected \"lagging\" or \"leading\"");
}

inline FlowTarget flow(const json& obj, const std::string& path, bool timed) {
    if (timed) check_keys(obj, path, {"s_va", "pf", "pf_sign", "t_s"});
    else check_keys(obj, path, {"s_va", "pf", "pf_sign"});
    FlowTarget f;
    f.s_va = number(obj, path, "s_va");
    f.pf = number(obj, path, "pf");
    f.sign = pf_sign(obj, path);
    if (!(f.s_va >= 0.0)) throw ConfigError(path + ".s_va", "must be >= 0");
    if (!(f.pf > 0.0 && f.pf <= 1.0)) throw ConfigError(path + ".pf", "must lie in (0, 1]");
    return f;
}

}  // namespace detail

/// Validates `doc` and builds the scenario it describes.
inline Config parse_config(const json& doc) {
    using detail::number;
    detail::check_keys(doc, "", {"line", "compensation", "model", "controller", "initial_flow",
                                 "events", "sim", "record", "pdelta", "analysis"});
    Config cfg;
    cfg.source = doc;
    json r = detail::merged(defaults_json(), doc);
    if (r["controller"].is_object())
        r["controller"] = detail::merged(controller_defaults_json(), r["controller"]);
    cfg.resolved = r;
    Scenario& s = cfg.scenario;

    const json& line = r["line"];
    detail::check_keys(line, "line", {"r_series_ohm", "l_series_h", "frequency_hz",
                                      "c_shunt_per_end_f", "voltage_ll_rms_v"});
    s.params.r_series = number(line, "line", "r_series_ohm");
    s.params.l_series = number(line, "line", "l_series_h");
    const double f0 = number(line, "line", "frequency_hz");
    s.params.c_shunt_per_end = number(line, "line", "c_shunt_per_end_f");
    s.bus_voltage_ll_rms = number(line, "line", "voltage_ll_rms_v");
    if (!(s.params.r_series >= 0.0)) throw ConfigError("line.r_series_ohm", "must be >= 0");
    if (!(s.params.l_series > 0.0)) throw ConfigError("line.l_series_h", "must be > 0");
    if (!(f0 > 0.0)) throw ConfigError("line.frequency_hz", "must be > 0");
    if (!(s.params.c_shunt_per_end >= 0.0))
        throw ConfigError("line.c_shunt_per_end_f", "must be >= 0");
    if (!(s.bus_voltage_ll_rms > 0.0)) throw ConfigError("line.voltage_ll_rms_v", "must be > 0");
    s.params.omega = 2.0 * std::numbers::pi * f0;

    const json& comp = r["compensation"];
    detail::check_keys(comp, "compensation", {"n_pu", "num_segments"});
    const double n = number(comp, "compensation", "n_pu");
    const long long segments = detail::integer(comp, "compensation", "num_segments");
    if (!(n >= 0.0 && n < 1.0)) throw ConfigError("compensation.n_pu", "must lie in [0, 1)");
    if (segments < 1) throw ConfigError("compensation.num_segments", "must be >= 1");
    s.comp = compensation_for(n, s.params, static_cast<int>(segments));

    const std::string model = r["model"].is_string() ? r["model"].get<std::string>() : "";
    if (model == "abc_rlc") s.model = ModelKind::abc_rlc;
    else if (model == "split_pi") s.model = ModelKind::split_pi;
    else if (model == "reduced") s.model = ModelKind::reduced;
    else throw ConfigError("model", "expected \"abc_rlc\", \"split_pi\" or \"reduced\"");
    if (s.model == ModelKind::split_pi && !(s.params.c_shunt_per_end > 0.0))
        throw ConfigError("line.c_shunt_per_end_f", "split_pi requires a positive shunt capacitance");
    if (s.model == ModelKind::reduced && !s.comp.compensated())
        throw ConfigError("compensation.n_pu", "the reduced model requires n_pu > 0");

    const json& ctrl = r["controller"];
    if (!ctrl.is_null()) {
        detail::check_keys(ctrl, "controller", {"mode", "k_p_per_s", "k_q_per_s",
                                                "smc_gain_w_per_s", "boundary_layer_w",
                                                "v_max_v", "ramp_max_v_per_s"});
        DpcConfig d;
        const std::string mode = detail::text(ctrl, "controller", "mode");
        if (mode == "deadbeat") d.mode = DpcMode::deadbeat;
        else if (mode == "sliding") d.mode = DpcMode::sliding;
        else throw ConfigError("controller.mode", "expected \"deadbeat\" or \"sliding\"");
        d.k_p = number(ctrl, "controller", "k_p_per_s");
        d.k_q = number(ctrl, "controller", "k_q_per_s");
        d.smc_gain = number(ctrl, "controller", "smc_gain_w_per_s");
        d.boundary_layer = number(ctrl, "controller", "boundary_layer_w");
        d.v_max = number(ctrl, "controller", "v_max_v");
        d.ramp_max = number(ctrl, "controller", "ramp_max_v_per_s");
        if (!(d.k_p > 0.0)) throw ConfigError("controller.k_p_per_s", "must be > 0");
        if (!(d.k_q > 0.0)) throw ConfigError("controller.k_q_per_s", "must be > 0");
        if (!(d.smc_gain >= 0.0)) throw ConfigError("controller.smc_gain_w_per_s", "must be >= 0");
        if (!(d.boundary_layer > 0.0)) throw ConfigError("controller.boundary_layer_w", "must be > 0");
        if (!(d.v_max > 0.0)) throw ConfigError("controller.v_max_v", "must be > 0");
        if (!(d.ramp_max > 0.0)) throw ConfigError("controller.ramp_max_v_per_s", "must be > 0");
        if (!s.comp.compensated())
            throw ConfigError("controller", "DPC requires compensation.n_pu > 0");
        s.controller = d;
    }

    s.initial_flow = detail::flow(r["initial_flow"], "initial_flow", false);

    const json& sim = r["sim"];
    detail::check_keys(sim, "sim", {"dt_s", "duration_s"});
    s.dt = number(sim, "sim", "dt_s");
    s.duration = number(sim, "sim", "duration_s");
    if (!(s.dt > 0.0)) throw ConfigError("sim.dt_s", "dt must be > 0");
    if (!(s.duration >= s.dt)) throw ConfigError("sim.duration_s", "must be >= dt_s");

    const json& events = r["events"];
    if (!events.is_array()) throw ConfigError("events", "expected an array");
    double last = -1.0;
    for (std::size_t k = 0; k < events.size(); ++k) {
        const std::string path = "events[" + std::to_string(k) + "]";
        Event e;
        e.target = detail::flow(events[k], path, true);
        e.t = number(events[k], path, "t_s");
        if (!(e.t >= 0.0 && e.t <= s.duration))
            throw ConfigError(path + ".t_s", "must lie within [0, sim.duration_s]");
        if (!(e.t > last)) throw ConfigError(path + ".t_s", "event times must be strictly increasing");
        last = e.t;
        s.events.push_back(e);
    }

    const json& rec = r["record"];
    if (!rec.is_array() || rec.empty()) throw ConfigError("record", "expected a non-empty array");
    for (std::size_t k = 0; k < rec.size(); ++k) {
        const std::string path = "record[" + std::to_string(k) + "]";
        if (!rec[k].is_string()) throw ConfigError(path, "expected a channel name");
        const std::string name = rec[k].get<std::string>();
        if (!is_channel_name(name)) throw ConfigError(path, "unknown channel \"" + name + "\"");
        s.record.push_back(name);
    }

    const json& pd = r["pdelta"];
    detail::check_keys(pd, "pdelta", {"delta_min_deg", "delta_max_deg", "steps"});
    cfg.pdelta.delta_min_deg = number(pd, "pdelta", "delta_min_deg");
    cfg.pdelta.delta_max_deg = number(pd, "pdelta", "delta_max_deg");
    const long long steps = detail::integer(pd, "pdelta", "steps");
    if (steps < 2) throw ConfigError("pdelta.steps", "must be >= 2");
    cfg.pdelta.steps = static_cast<std::size_t>(steps);
    if (!(cfg.pdelta.delta_min_deg > -180.0))
        throw ConfigError("pdelta.delta_min_deg", "must be > -180");
    if (!(cfg.pdelta.delta_max_deg < 180.0))
        throw ConfigError("pdelta.delta_max_deg", "must be < 180");
    if (!(cfg.pdelta.delta_min_deg < cfg.pdelta.delta_max_deg))
        throw ConfigError("pdelta.delta_max_deg", "must exceed delta_min_deg");

    const json& an = r["analysis"];
    detail::check_keys(an, "analysis", {"ssr_half_bandwidth_hz"});
    cfg.analysis.ssr_half_bandwidth_hz = number(an, "analysis", "ssr_half_bandwidth_hz");
    if (!(cfg.analysis.ssr_half_bandwidth_hz > 0.0))
        throw ConfigError("analysis.ssr_half_bandwidth_hz", "must be > 0");

    try {
        s.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError("scenario", e.what());
    }
    return cfg;
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    json doc;
    try {
        doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(doc);
}

}  // namespace sercomp::cli
