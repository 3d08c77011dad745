// sercomp: simulate and analyse a series-compensated transmission line.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sercomp/cli/commands.hpp"

namespace {

using namespace sercomp::cli;

int run(int argc, char** argv) {
    CLI::App app{"Series-compensated transmission line simulator", "sercomp"};
    app.set_version_flag("--version", std::string(SERCOMP_VERSION));
    app.require_subcommand(1);

    std::string config;
    std::string out = "out";

    auto* sim = app.add_subcommand("simulate", "Run a time-domain scenario");
    sim->add_option("--config", config, "Scenario JSON")->required();
    sim->add_option("--out", out, "Output directory")->required();

    std::string n_text;
    auto* sweep = app.add_subcommand("ssr-sweep", "Measure the SSR frequency across compensation levels");
    sweep->add_option("--config", config, "Scenario JSON with at least one event")->required();
    sweep->add_option("--n", n_text, "Comma-separated compensation levels, e.g. 0.05,0.15,0.25")
        ->required();
    sweep->add_option("--out", out, "Output directory")->required();

    double f_min = 1.0;
    double f_max = 1000.0;
    int points = 400;
    auto* bode = app.add_subcommand("bode", "Frequency response of the reduced line model");
    bode->add_option("--config", config, "Scenario JSON")->required();
    bode->add_option("--fmin", f_min, "Lowest frequency (Hz)")->capture_default_str();
    bode->add_option("--fmax", f_max, "Highest frequency (Hz)")->capture_default_str();
    bode->add_option("--points", points, "Number of log-spaced points")->capture_default_str();
    bode->add_option("--out", out, "Output directory")->required();

    double n = 0.0;
    DesignOverrides overrides;
    std::optional<std::string> design_out;
    auto* design = app.add_subcommand("design", "Size the series capacitor for a compensation level");
    design->add_option("--n", n, "Compensation level in per unit, 0 < n < 1")->required();
    design->add_option("--r-ohm", overrides.r_ohm, "Series resistance override");
    design->add_option("--l-h", overrides.l_h, "Series inductance override");
    design->add_option("--f-hz", overrides.f_hz, "Nominal frequency override");
    design->add_option("--segments", overrides.segments, "Number of capacitor segments");
    design->add_option("--out", design_out, "Directory for design.json (default: current)");

    auto* pdelta = app.add_subcommand("pdelta", "Steady-state power-angle curves");
    pdelta->add_option("--config", config, "Scenario JSON")->required();
    pdelta->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    if (*sim) return cmd_simulate(config, out);
    if (*sweep) {
        std::vector<double> list;
        try {
            list = parse_list(n_text);
        } catch (const std::exception& e) {
            std::cerr << "error: --n: " << e.what() << '\n';
            return kConfigError;
        }
        return cmd_ssr_sweep(config, list, out);
    }
    if (*bode) return cmd_bode(config, f_min, f_max, points, out);
    if (*design) {
        std::optional<fs::path> dir;
        if (design_out) dir = fs::path(*design_out);
        return cmd_design(n, overrides, dir);
    }
    if (*pdelta) return cmd_pdelta(config, out);
    return kConfigError;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    }
}
