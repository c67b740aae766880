// twophoton: scenario runner for the pump-interferometer two-photon simulator.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "twophoton/scenario.hpp"

namespace fs = std::filesystem;
using namespace twophoton;

namespace {

enum Exit { kOk = 0, kValidation = 1, kFitFailure = 2, kIo = 3 };

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonArgs {
    std::string scenario;
    std::string config;
    std::uint64_t seed = 1;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> points;
    std::optional<double> v0;
    std::string out = ".";
    unsigned workers = 0;
    std::size_t resamples = 200;
};

void add_common(CLI::App* cmd, CommonArgs& a)
{
    cmd->add_option("scenario", a.scenario, "Scenario name")->required();
    cmd->add_option("--config", a.config, "Config file of `section.key = value` lines");
    cmd->add_option("--seed", a.seed, "Random seed");
    cmd->add_option("--trials", a.trials, "Monte Carlo trials per scan point");
    cmd->add_option("--points", a.points, "Scan points");
    cmd->add_option("--v0", a.v0, "Baseline two-photon visibility V0 (e.g. 0.93)");
    cmd->add_option("--out", a.out, "Output directory");
    cmd->add_option("--workers", a.workers, "Worker threads (0: all cores); results do not depend on it");
    cmd->add_option("--resamples", a.resamples, "Bootstrap resamples (>= 200)");
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write '" + path.string() + "'");
    out << text;
    out.close();
    if (!out)
        throw IoError("failed writing '" + path.string() + "'");
}

fs::path prepare_out_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw IoError("cannot create output directory '" + dir + "'");
    return fs::path(dir);
}

RunConfig resolve_config(Scenario s, const CommonArgs& a, RunOptions& o)
{
    RunConfig c = preset_config(s);
    if (!a.config.empty()) {
        ConfigOverrides overrides;
        try {
            overrides = parse_config(a.config);
        } catch (const std::ios_base::failure& e) {
            throw IoError(e.what());
        }
        apply_overrides(c, overrides);
    }
    o.seed = a.seed;
    o.trials = a.trials;
    o.points = a.points;
    o.v0 = a.v0;
    o.exec.workers = a.workers;
    o.bootstrap_resamples = a.resamples;
    apply_options(s, c, o);
    return c;
}

int do_sweep(Scenario s, const RunConfig& c, const RunOptions& o, const std::string& grid_spec, const fs::path& out)
{
    const auto grid = parse_grid(grid_spec, sweep_value_kind(s));
    const SweepReport r = run_sweep(s, c, grid, o);
    write_file(out / (to_string(s) + "_sweep.csv"), sweep_csv(r));
    write_file(out / (to_string(s) + "_report.txt"), sweep_report_text(r));
    std::cout << sweep_report_text(r);
    for (const auto& p : r.points)
        if (p.status.rfind("failed", 0) == 0)
            return kFitFailure;
    return kOk;
}

int do_run(Scenario s, const RunConfig& c, const RunOptions& o, const fs::path& out)
{
    if (is_sweep(s))
        return do_sweep(s, c, o, default_sweep_grid(s), out);
    const RunReport r = run_scenario(s, c, o);
    write_file(out / (to_string(s) + "_scan.csv"), scan_csv(r));
    write_file(out / (to_string(s) + "_report.txt"), report_text(r));
    std::cout << report_text(r);
    if (r.fit.performed && !r.fit.ok) {
        std::cerr << "error: fit failed: " << r.fit.message << "\n";
        return kFitFailure;
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Two-photon interference simulator: run named experiment presets and fit the results."};
    app.require_subcommand(1);

    std::string names;
    for (const auto& [_, n] : scenario_names())
        names += (names.empty() ? "" : ", ") + n;

    CommonArgs run_args;
    auto* run = app.add_subcommand("run", "Run a scenario (" + names + ")");
    add_common(run, run_args);

    CommonArgs sweep_args;
    std::string grid;
    auto* sweep = app.add_subcommand("sweep", "Sweep a parameter (mismatch-sweep, split-sweep)");
    add_common(sweep, sweep_args);
    sweep->add_option("--grid", grid, "Comma list with units (0,66um,1mm) or start:step:stop")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    const bool sweeping = sweep->parsed();
    const CommonArgs& a = sweeping ? sweep_args : run_args;
    try {
        const Scenario s = parse_scenario(a.scenario);
        if (sweeping && !is_sweep(s))
            throw ConfigError("sweep needs mismatch-sweep or split-sweep, got '" + a.scenario + "'");
        RunOptions o;
        const RunConfig c = resolve_config(s, a, o);
        const fs::path out = prepare_out_dir(a.out);
        return sweeping ? do_sweep(s, c, o, grid, out) : do_run(s, c, o, out);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const FitError& e) {
        std::cerr << "error: fit failed: " << e.what() << "\n";
        return kFitFailure;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    }
}
