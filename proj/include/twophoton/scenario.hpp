#pragma once

// Named experiment presets, the run/sweep drivers behind the command-line
// tool, and their CSV / report renderers.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "twophoton/analysis.hpp"
#include "twophoton/apparatus.hpp"
#include "twophoton/config.hpp"
#include "twophoton/pump.hpp"

namespace twophoton {

enum class Scenario {
    hom,
    balanced,
    unbalanced,
    pump_mz,
    franson,
    timebin,
    pump_stability,
    michelson,
    mismatch_sweep,
    split_sweep
};

inline const std::vector<std::pair<Scenario, std::string>>& scenario_names()
{
    static const std::vector<std::pair<Scenario, std::string>> names{
        {Scenario::hom, "hom"},
        {Scenario::balanced, "balanced"},
        {Scenario::unbalanced, "unbalanced"},
        {Scenario::pump_mz, "pump-mz"},
        {Scenario::franson, "franson"},
        {Scenario::timebin, "timebin"},
        {Scenario::pump_stability, "pump-stability"},
        {Scenario::michelson, "michelson"},
        {Scenario::mismatch_sweep, "mismatch-sweep"},
        {Scenario::split_sweep, "split-sweep"}};
    return names;
}

inline std::string to_string(Scenario s)
{
    for (const auto& [v, n] : scenario_names())
        if (v == s)
            return n;
    return "?";
}

inline Scenario parse_scenario(const std::string& name)
{
    for (const auto& [v, n] : scenario_names())
        if (n == name)
            return v;
    throw ConfigError("unknown scenario '" + name + "'");
}

inline bool is_sweep(Scenario s) { return s == Scenario::mismatch_sweep || s == Scenario::split_sweep; }

// Defaults for each experiment before any config file or flag is applied.
inline RunConfig preset_config(Scenario s)
{
    RunConfig c;
    switch (s) {
    case Scenario::hom:
        c.app.pump_mz.enabled = false;
        c.app.pdc_mz.enabled = false;
        break;
    case Scenario::balanced:
        c.app.pump_mz.enabled = false;
        c.app.pdc_mz.imbalance_path = 0.0;
        break;
    case Scenario::unbalanced:
        c.app.pump_mz.enabled = false;
        break;
    case Scenario::pump_mz:
    case Scenario::mismatch_sweep:
    case Scenario::split_sweep:
        break;
    case Scenario::franson:
        c.pump.kind = PumpKind::coherent;
        break;
    case Scenario::timebin:
        c.pump.kind = PumpKind::pulsed;
        c.app.gate.enabled = true;
        c.app.gate.accepted_slot = 1;
        break;
    case Scenario::pump_stability:
        c.pump.kind = PumpKind::multimode_comb;
        c.app.pump_mz.split = SplitRatio(0.6);
        c.app.pdc_mz.enabled = false;
        c.scan.rate_scale = 2.0e4;
        break;
    case Scenario::michelson:
        c.pump.kind = PumpKind::multimode_comb;
        break;
    }
    return c;
}

struct RunOptions {
    std::uint64_t seed = 1;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> points;
    std::optional<double> v0;
    std::size_t bootstrap_resamples = 200;
    Execution exec{};
};

// Applies command-line overrides on top of the preset and config file.
inline void apply_options(Scenario s, RunConfig& c, const RunOptions& o)
{
    if (o.trials) {
        if (*o.trials < 2)
            throw ConfigError("--trials must be at least 2");
        c.scan.trials = *o.trials;
    }
    if (o.points) {
        if (*o.points < 10)
            throw ConfigError("--points must be at least 10");
        if (s == Scenario::hom)
            c.hom.points = *o.points;
        else
            c.scan.points = *o.points;
    }
    if (o.v0) {
        if (!(*o.v0 >= 0.0 && *o.v0 <= 1.0))
            throw ConfigError("--v0 must lie in [0,1]");
        c.app.baseline_visibility = *o.v0;
    }
    c.app.validate();
    validate(c.pump.model());
}

struct FitSummary {
    bool performed = false;
    bool ok = false;
    std::string kind;
    double visibility = 0.0;
    double bootstrap_stderr = std::nan("");
    double covariance_stderr = std::nan("");
    double period = 0.0; // fringe period at mid-scan (x units) or dip width
    double residual_rms = 0.0;
    std::optional<double> analytic;
    std::string message;
    std::vector<std::pair<std::string, std::string>> extra;
};

struct RunReport {
    Scenario scenario = Scenario::hom;
    RunConfig config;
    RunOptions options;
    ScanResult scan;
    FitSummary fit;
    double wall_seconds = 0.0;
    std::string config_hash;
};

namespace detail {

inline std::string hex64(std::uint64_t v)
{
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string config_hash(Scenario s, const RunConfig& c, std::size_t trials)
{
    std::uint64_t h = 0xcbf29ce484222325ull; // FNV-1a
    const std::string text = to_string(s) + "\n" + dump_config(c) + "trials=" + std::to_string(trials);
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return hex64(h);
}

inline std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return g;
}

// Fringe fit with a parametric bootstrap for the visibility uncertainty.
inline FitSummary fringe_summary(const ScanResult& scan, const RunOptions& o, RngStream stream)
{
    FitSummary f;
    f.performed = true;
    f.kind = "fringe (stretched phase)";
    const FringeFit fit = fit_fringe(scan, PhaseModel::stretched);
    f.ok = true;
    f.visibility = fit.visibility;
    f.covariance_stderr = fit.visibility_stderr;
    f.residual_rms = fit.residual_rms;
    const double omega = std::abs(fit.phase_model_coeffs[0]);
    f.period = omega > 0.0 ? 2.0 * kPi / omega : std::nan("");
    f.extra.push_back({"fringe_cycles", num(fit.fringe_cycles)});
    f.extra.push_back({"fit_iterations", std::to_string(fit.iterations)});
    if (fit.at_bound)
        f.extra.push_back({"at_physical_bound", "true"});
    try {
        const auto boot = bootstrap(
            scan, [](const ScanResult& s) { return fringe_parameters(fit_fringe(s, PhaseModel::stretched)); },
            o.bootstrap_resamples, stream, o.exec);
        f.bootstrap_stderr = boot.std_error[0];
        f.extra.push_back({"bootstrap_failures", std::to_string(boot.failures)});
    } catch (const FitError& e) {
        f.message = std::string("bootstrap unavailable: ") + e.what();
    }
    return f;
}

inline double stderr_of(const FitSummary& f)
{
    return std::isfinite(f.bootstrap_stderr) ? f.bootstrap_stderr : f.covariance_stderr;
}

} // namespace detail

// Runs one preset end to end. A FitError from the main fit is recorded in
// the summary (ok = false) rather than thrown so the scan can still be saved.
inline RunReport run_scenario(Scenario s, const RunConfig& config, const RunOptions& options)
{
    if (is_sweep(s))
        throw ConfigError("run_scenario: '" + to_string(s) + "' is a sweep");
    const auto start = std::chrono::steady_clock::now();
    RunReport r;
    r.scenario = s;
    r.config = config;
    r.options = options;
    r.config_hash = detail::config_hash(s, config, config.scan.trials);
    const RngStream root{options.seed, 0};
    const RngStream scan_stream = root.split(1);
    const RngStream boot_stream = root.split(2);
    const PumpModel pump = config.pump.model();
    const auto& c = config;

    switch (s) {
    case Scenario::hom: {
        const auto grid = detail::linspace(-c.hom.half_range, c.hom.half_range, c.hom.points);
        r.scan = hom_scan(c.app, grid, c.hom.injected_visibility, {c.hom.rate_scale, c.hom.dwell, scan_stream});
        r.fit.performed = true;
        r.fit.kind = "dip (gaussian)";
        r.fit.analytic = c.hom.injected_visibility;
        try {
            const DipFit fit = fit_dip(r.scan, DipShape::gaussian);
            r.fit.ok = true;
            r.fit.visibility = fit.visibility;
            r.fit.covariance_stderr = fit.visibility_stderr;
            r.fit.residual_rms = fit.residual_rms;
            r.fit.period = fit.width;
            r.fit.extra.push_back({"center_delay_s", detail::num(fit.center_delay)});
            try {
                const auto boot = bootstrap(
                    r.scan, [](const ScanResult& x) { return dip_parameters(fit_dip(x, DipShape::gaussian)); },
                    options.bootstrap_resamples, boot_stream, options.exec);
                r.fit.bootstrap_stderr = boot.std_error[0];
            } catch (const FitError& e) {
                r.fit.message = std::string("bootstrap unavailable: ") + e.what();
            }
        } catch (const FitError& e) {
            r.fit.message = e.what();
        }
        break;
    }
    case Scenario::michelson: {
        const auto n = static_cast<std::size_t>(std::floor(c.michelson.max_delay / c.michelson.step + 0.5)) + 1;
        std::vector<double> grid(n);
        for (std::size_t i = 0; i < n; ++i)
            grid[i] = static_cast<double>(i) * c.michelson.step;
        const MichelsonScan m = michelson_scan(pump, grid);
        r.scan = m.scan;
        r.scan.meta.seed = options.seed;
        r.scan.meta.apparatus_summary = describe(pump);
        r.fit.performed = true;
        r.fit.kind = "comb peak spacing";
        r.fit.ok = m.peak_spacing.has_value();
        r.fit.visibility = first_order_mz_visibility(pump, c.app.pump_mz.imbalance_path, c.app.pump_mz.split);
        r.fit.analytic = r.fit.visibility;
        if (m.peak_spacing)
            r.fit.extra.push_back({"peak_spacing_m", detail::num(*m.peak_spacing)});
        else
            r.fit.message = "no recurring coherence peaks found";
        if (c.pump.kind == PumpKind::multimode_comb)
            r.fit.extra.push_back({"configured_spacing_m", detail::num(c.pump.comb.peak_spacing_path)});
        r.fit.extra.push_back({"peaks_found", std::to_string(m.peak_positions.size())});
        break;
    }
    case Scenario::pump_stability: {
        // Single-photon interference of the pump in its own interferometer
        // while the pump phase drifts.
        const std::size_t n = c.scan.points;
        const double dwell = c.scan.duration / static_cast<double>(n);
        r.scan.x_label = "time_s";
        r.scan.meta.seed = options.seed;
        r.scan.meta.trials = c.scan.trials;
        r.scan.meta.apparatus_summary = c.app.summary() + " pump=" + describe(pump);
        r.scan.meta.dwell = dwell;
        r.scan.meta.rate_scale = c.scan.rate_scale;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) * dwell;
            const RngStream ps = scan_stream.split(i);
            const RateEstimate e =
                first_order_intensity(pump, c.app.pump_mz.imbalance_path, c.app.pump_mz.split,
                                      c.drift.phase_at(t, c.scan.duration), c.scan.trials, ps, options.exec);
            const double rate = std::max(0.0, e.value);
            const auto counts = detail::poisson_counts(rate * c.scan.rate_scale * dwell, ps.split(0xC0FFEEu));
            r.scan.points.push_back({t, rate, counts, e.std_error});
        }
        r.fit.analytic = first_order_mz_visibility(pump, c.app.pump_mz.imbalance_path, c.app.pump_mz.split);
        try {
            r.fit = detail::fringe_summary(r.scan, options, boot_stream);
            r.fit.analytic = first_order_mz_visibility(pump, c.app.pump_mz.imbalance_path, c.app.pump_mz.split);
        } catch (const FitError& e) {
            r.fit.performed = true;
            r.fit.message = e.what();
        }
        break;
    }
    default: {
        r.scan = phase_scan(c.app, pump, c.drift, c.scan, scan_stream, options.exec);
        const double analytic = expected_fringe_visibility(c.app, pump);
        try {
            r.fit = detail::fringe_summary(r.scan, options, boot_stream);
        } catch (const FitError& e) {
            r.fit.performed = true;
            r.fit.kind = "fringe (stretched phase)";
            r.fit.message = e.what();
        }
        r.fit.analytic = analytic;
        if (r.scan.meta.acceptance_fraction)
            r.fit.extra.push_back({"acceptance_fraction", detail::num(*r.scan.meta.acceptance_fraction)});
        r.fit.extra.push_back({"mean_rate", detail::num(r.scan.mean_rate())});
        break;
    }
    }
    r.scan.scenario = to_string(s);
    r.scan.meta.seed = options.seed;
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

inline std::string scan_csv(const RunReport& r)
{
    std::ostringstream s;
    s << "# scenario: " << to_string(r.scenario) << "\n"
      << "# seed: " << r.options.seed << "\n"
      << "# trials: " << r.config.scan.trials << "\n"
      << "# config_hash: " << r.config_hash << "\n"
      << "# x: " << r.scan.x_label << "\n"
      << "x,rate,counts,stderr\n";
    for (const auto& p : r.scan.points)
        s << detail::num(p.x) << "," << detail::num(p.rate) << "," << p.counts << "," << detail::num(p.std_error)
          << "\n";
    return s.str();
}

inline std::string report_text(const RunReport& r)
{
    std::ostringstream s;
    s << "scenario: " << to_string(r.scenario) << "\n"
      << "seed: " << r.options.seed << "\n"
      << "trials: " << r.config.scan.trials << "\n"
      << "config_hash: " << r.config_hash << "\n"
      << "scan_file: " << to_string(r.scenario) << "_scan.csv (" << r.scan.points.size() << " points)\n"
      << "apparatus: " << r.scan.meta.apparatus_summary << "\n"
      << "wall_clock_s: " << detail::num(r.wall_seconds) << "\n\n";
    s << "[fit]\n";
    if (!r.fit.performed) {
        s << "none\n";
    } else {
        s << "kind: " << r.fit.kind << "\n"
          << "status: " << (r.fit.ok ? "ok" : "failed") << "\n";
        if (r.fit.ok) {
            s << "fitted_visibility: " << detail::num(r.fit.visibility) << "\n"
              << "analytic_visibility: " << (r.fit.analytic ? detail::num(*r.fit.analytic) : "n/a") << "\n"
              << "visibility_stderr_bootstrap: " << detail::num(r.fit.bootstrap_stderr) << "\n"
              << "visibility_stderr_covariance: " << detail::num(r.fit.covariance_stderr) << "\n"
              << "period_or_width: " << detail::num(r.fit.period) << "\n"
              << "residual_rms: " << detail::num(r.fit.residual_rms) << "\n";
        }
        for (const auto& [k, v] : r.fit.extra)
            s << k << ": " << v << "\n";
        if (!r.fit.message.empty())
            s << "message: " << r.fit.message << "\n";
    }
    s << "\n[config]\n" << dump_config(r.config);
    return s.str();
}

struct SweepPoint {
    double parameter = 0.0;
    double visibility = std::nan("");
    double std_error = std::nan("");
    double analytic = std::nan("");
    std::string status;
};

struct SweepReport {
    Scenario scenario = Scenario::split_sweep;
    RunConfig config;
    RunOptions options;
    std::vector<SweepPoint> points;
    double wall_seconds = 0.0;
    std::string config_hash;
};

inline std::string sweep_parameter_name(Scenario s)
{
    return s == Scenario::mismatch_sweep ? "path_mismatch_m" : "short_power_fraction";
}

inline std::string default_sweep_grid(Scenario s)
{
    return s == Scenario::mismatch_sweep ? "0,66um,1mm" : "0.5,0.6,0.7";
}

// Grid spec: comma list ("0, 66um, 1mm") or range "start:step:stop".
inline std::vector<double> parse_grid(const std::string& spec, ValueKind kind)
{
    std::vector<double> out;
    auto value = [&](const std::string& t) { return std::get<double>(detail::parse_value(kind, detail::trim(t))); };
    if (spec.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream in(spec);
        std::string item;
        while (std::getline(in, item, ':'))
            parts.push_back(item);
        if (parts.size() != 3)
            throw ConfigError("grid range must be start:step:stop");
        const double a = value(parts[0]), step = value(parts[1]), b = value(parts[2]);
        if (!(step > 0.0) || !(b >= a))
            throw ConfigError("grid range needs step > 0 and stop >= start");
        const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
        if (n > 10000)
            throw ConfigError("grid range has too many points");
        for (std::size_t i = 0; i < n; ++i)
            out.push_back(a + step * static_cast<double>(i));
    } else {
        std::stringstream in(spec);
        std::string item;
        while (std::getline(in, item, ','))
            out.push_back(value(item));
    }
    if (out.size() < 3)
        throw ConfigError("sweep grid needs at least 3 points");
    return out;
}

inline ValueKind sweep_value_kind(Scenario s)
{
    return s == Scenario::mismatch_sweep ? ValueKind::length : ValueKind::number;
}

// One phase scan and fringe fit per grid value. Failures are recorded in the
// point's status and the sweep continues.
inline SweepReport run_sweep(Scenario s, const RunConfig& config, const std::vector<double>& grid,
                             const RunOptions& options)
{
    if (!is_sweep(s))
        throw ConfigError("'" + to_string(s) + "' is not a sweep scenario");
    if (grid.size() < 3)
        throw ConfigError("sweep grid needs at least 3 points");
    const auto start = std::chrono::steady_clock::now();
    SweepReport r;
    r.scenario = s;
    r.config = config;
    r.options = options;
    r.config_hash = detail::config_hash(s, config, config.scan.trials);
    const RngStream root{options.seed, 0};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        SweepPoint p;
        p.parameter = grid[i];
        try {
            RunConfig c = config;
            if (s == Scenario::mismatch_sweep)
                c.app.pump_mz.imbalance_path = c.app.pdc_mz.imbalance_path + grid[i];
            else
                c.app.pump_mz.split = SplitRatio(grid[i]);
            c.app.validate();
            const PumpModel pump = c.pump.model();
            p.analytic = expected_fringe_visibility(c.app, pump);
            const RngStream ps = root.split(100 + i);
            const ScanResult scan = phase_scan(c.app, pump, c.drift, c.scan, ps.split(1), options.exec);
            const FitSummary f = detail::fringe_summary(scan, options, ps.split(2));
            p.visibility = f.visibility;
            p.std_error = detail::stderr_of(f);
            p.status = f.message.empty() ? "ok" : "ok (covariance stderr)";
        } catch (const std::exception& e) {
            p.status = std::string("failed: ") + e.what();
        }
        r.points.push_back(p);
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

inline std::string sweep_csv(const SweepReport& r)
{
    std::ostringstream s;
    s << "# scenario: " << to_string(r.scenario) << "\n"
      << "# seed: " << r.options.seed << "\n"
      << "# trials: " << r.config.scan.trials << "\n"
      << "# config_hash: " << r.config_hash << "\n"
      << "# parameter: " << sweep_parameter_name(r.scenario) << "\n"
      << "parameter,visibility,stderr,status\n";
    for (const auto& p : r.points) {
        std::string status = p.status;
        for (auto& ch : status)
            if (ch == ',' || ch == '\n')
                ch = ';';
        s << detail::num(p.parameter) << "," << detail::num(p.visibility) << "," << detail::num(p.std_error) << ","
          << status << "\n";
    }
    return s.str();
}

inline std::string sweep_report_text(const SweepReport& r)
{
    std::ostringstream s;
    s << "scenario: " << to_string(r.scenario) << "\n"
      << "seed: " << r.options.seed << "\n"
      << "trials: " << r.config.scan.trials << "\n"
      << "config_hash: " << r.config_hash << "\n"
      << "sweep_file: " << to_string(r.scenario) << "_sweep.csv\n"
      << "wall_clock_s: " << detail::num(r.wall_seconds) << "\n\n"
      << "[points]\n"
      << sweep_parameter_name(r.scenario) << "  fitted  stderr  analytic  status\n";
    for (const auto& p : r.points)
        s << detail::num(p.parameter) << "  " << detail::num(p.visibility) << "  " << detail::num(p.std_error)
          << "  " << detail::num(p.analytic) << "  " << p.status << "\n";
    s << "\n[config]\n" << dump_config(r.config);
    return s.str();
}

} // namespace twophoton
