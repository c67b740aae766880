// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "twophoton/twophoton.hpp"

using namespace twophoton;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        pass = pass && ok;
        if (!detail.empty())
            detail += "; ";
        detail += what + (ok ? "" : " [x]");
    }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

const PhaseDiffusion kDiode{coherence_length(0.1e-9, 407e-9)};

// 60-point scan over exactly three two-photon periods with counts high
// enough that Monte Carlo error dominates.
PhaseScanSettings scan_settings(std::size_t points = 60)
{
    PhaseScanSettings s;
    s.points = points;
    s.trials = 100000;
    s.rate_scale = 1e6;
    return s;
}

const DriftModel kDrift = DriftModel::linear(6.0 * kPi);

FringeFit fit(const ScanResult& scan) { return fit_fringe(scan, PhaseModel::stretched); }

Outcome eq2_reproduction()
{
    Outcome o;
    const Apparatus app = preset_config(Scenario::pump_mz).app;
    const auto s = scan_settings();
    const auto scan = phase_scan(app, kDiode, kDrift, s, RngStream{1001, 0});
    const double v = fit(scan).visibility;
    o.require(std::abs(v - 0.5) <= 0.010, fmt("fitted V = %.4f (0.500 +- 0.010)", v));
    const double power = delivered_pump_fraction(app);
    int within = 0;
    for (const auto& p : scan.points) {
        const double phi = kDrift.phase_at(p.x, s.duration);
        const double oracle = power * (1.0 - 0.5 * std::cos(app.pump_mz.phase - phi));
        within += std::abs(p.rate - oracle) < 5.0 * p.std_error;
    }
    o.require(within == static_cast<int>(scan.points.size()),
              fmt("%.0f/%.0f points within 5 sigma of 1 - cos(phi_p - phi)/2", within, scan.points.size()));
    return o;
}

Outcome franson_limit()
{
    Outcome o;
    const Apparatus app = preset_config(Scenario::franson).app;
    const double v = fit(phase_scan(app, Coherent{}, kDrift, scan_settings(), RngStream{1002, 0})).visibility;
    o.require(v >= 0.99, fmt("fitted V = %.4f (>= 0.99)", v));
    return o;
}

Outcome timebin_limit()
{
    Outcome o;
    const Apparatus app = preset_config(Scenario::timebin).app;
    const auto scan = phase_scan(app, Pulsed{}, kDrift, scan_settings(), RngStream{1003, 0});
    const double v = fit(scan).visibility;
    o.require(v >= 0.99, fmt("fitted V = %.4f (>= 0.99)", v));
    const double acc = scan.meta.acceptance_fraction.value_or(-1.0);
    o.require(std::abs(acc - 0.5) <= 0.02, fmt("acceptance = %.4f (0.50 +- 0.02)", acc));
    return o;
}

Outcome washout()
{
    Outcome o;
    const Apparatus app = preset_config(Scenario::unbalanced).app;
    const double v = fit(phase_scan(app, kDiode, kDrift, scan_settings(), RngStream{1004, 0})).visibility;
    o.require(v <= 0.02, fmt("fitted V = %.4f (<= 0.02)", v));
    return o;
}

Outcome split_law()
{
    Outcome o;
    Apparatus app = preset_config(Scenario::pump_mz).app;
    app.pump_mz.split = SplitRatio(0.6);
    const double v = fit(phase_scan(app, kDiode, kDrift, scan_settings(), RngStream{1005, 0})).visibility;
    o.require(std::abs(v - 0.490) <= 0.005, fmt("fitted V = %.4f (0.490 +- 0.005)", v));
    const double first = first_order_mz_visibility(Coherent{}, 0.60, SplitRatio(0.6));
    o.require(std::abs(first - 0.9798) <= 1e-4, fmt("first-order V = %.5f (0.9798 +- 1e-4)", first));
    return o;
}

Outcome imperfection_scaling()
{
    Outcome o;
    Apparatus app = preset_config(Scenario::pump_mz).app;
    app.baseline_visibility = 0.93;
    const double v = fit(phase_scan(app, kDiode, kDrift, scan_settings(), RngStream{1006, 0})).visibility;
    o.require(std::abs(v - 0.465) <= 0.010, fmt("fitted V = %.4f (0.465 +- 0.010)", v));
    return o;
}

Outcome hom_dip()
{
    Outcome o;
    RunOptions opts;
    opts.seed = 1007;
    const auto report = run_scenario(Scenario::hom, preset_config(Scenario::hom), opts);
    o.require(report.fit.ok && std::abs(report.fit.visibility - 0.978) <= 0.005,
              fmt("fitted V = %.4f (0.978 +- 0.005)", report.fit.visibility));
    Apparatus rect;
    rect.filter.shape = SpectralShape::rectangular;
    std::vector<double> grid;
    for (int i = -120; i <= 120; ++i)
        grid.push_back(i * 10e-15);
    const auto scan = hom_scan(rect, grid, 0.978, {4000.0, 5.0, RngStream{1007, 1}});
    int shoulders = 0;
    for (const auto& p : scan.points)
        shoulders += p.rate > 1.0;
    o.require(shoulders >= 1, fmt("rectangular filter: %.0f shoulder points above baseline", shoulders));
    return o;
}

Outcome michelson_comb()
{
    Outcome o;
    const MultimodeComb comb = default_diode_comb();
    std::vector<double> grid;
    for (int i = 0; i <= 4000; ++i)
        grid.push_back(i * 5e-6);
    const auto m = michelson_scan(comb, grid);
    const double spacing = m.peak_spacing.value_or(0.0);
    o.require(std::abs(spacing - 4705.5e-6) <= 5e-6, fmt("spacing = %.2f um (4705.5 +- 5)", spacing * 1e6));
    const double v = first_order_mz_visibility(comb, 0.60, SplitRatio(0.6));
    o.require(std::abs(v - 0.08) <= 0.03, fmt("first-order V at 60 cm = %.4f (0.08 +- 0.03)", v));
    return o;
}

Outcome power_bookkeeping()
{
    Outcome o;
    auto s = scan_settings();
    s.trials = 20000;
    const auto with = phase_scan(preset_config(Scenario::pump_mz).app, kDiode, kDrift, s, RngStream{1009, 0});
    const auto without = phase_scan(preset_config(Scenario::unbalanced).app, kDiode, kDrift, s, RngStream{1009, 1});
    const double ratio = mean_rate_ratio(with, without);
    o.require(std::abs(ratio - 0.5) <= 0.05, fmt("ratio = %.4f (0.50 +- 0.05)", ratio));
    return o;
}

Outcome property_suites()
{
    Outcome o;

    {
        std::mt19937_64 rng(10);
        std::uniform_real_distribution<double> u(-1.0, 1.0), r01(0.0, 1.0);
        double worst = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const Amplitude a{u(rng), u(rng)}, b{u(rng), u(rng)};
            const auto [o1, o2] = beamsplitter(a, b, r01(rng));
            const double in = std::norm(a) + std::norm(b);
            worst = std::max(worst, std::abs(std::norm(o1) + std::norm(o2) - in) / in);
        }
        o.require(worst <= 1e-12, fmt("unitarity worst rel. error %.1e", worst));
    }

    {
        bool ok = true;
        const std::vector<PumpModel> models{Coherent{}, kDiode, default_diode_comb(), Pulsed{}};
        for (const auto& m : models)
            for (double d = 0.0; d <= 0.7; d += 0.00037) {
                const Amplitude g = g1_analytic(m, d);
                ok = ok && std::abs(g) <= 1.0 + 1e-12 && std::abs(g1_analytic(m, -d) - std::conj(g)) <= 1e-15;
            }
        o.require(ok, "g1 bounded and Hermitian");
    }

    {
        double worst = 0.0;
        // Pulsed coherence decays on the pulse scale, so it gets its own delays.
        const double ps = kSpeedOfLight * 1e-12;
        const std::vector<std::pair<PumpModel, std::vector<double>>> cases{
            {kDiode, {0.5e-3, 1.65649e-3, 4705.5e-6, 0.6}},
            {default_diode_comb(), {0.5e-3, 1.65649e-3, 4705.5e-6, 0.6}},
            {Pulsed{}, {0.1 * ps, 0.3 * ps, 0.6 * ps, 1.0 * ps}},
        };
        for (std::size_t k = 0; k < cases.size(); ++k)
            for (double d : cases[k].second) {
                const auto est = g1_estimate(cases[k].first, d, 100000, RngStream{1010, k});
                worst = std::max(worst, std::abs(est.value - g1_analytic(cases[k].first, d)) / est.std_error);
            }
        o.require(worst < 5.0, fmt("g1 MC vs analytic worst %.2f sigma", worst));
    }

    {
        RunConfig c = preset_config(Scenario::mismatch_sweep);
        c.scan = scan_settings();
        c.scan.trials = 20000;
        c.drift = kDrift;
        RunOptions opts;
        opts.seed = 1011;
        const std::vector<double> grid{0.0, 20e-6, 50e-6, 100e-6, 1e-3};
        const auto sweep = run_sweep(Scenario::mismatch_sweep, c, grid, opts);
        bool monotone = true, all_ok = true;
        for (std::size_t i = 0; i < sweep.points.size(); ++i) {
            all_ok = all_ok && sweep.points[i].status.rfind("ok", 0) == 0;
            if (i > 0) {
                const auto& a = sweep.points[i - 1];
                const auto& b = sweep.points[i];
                monotone = monotone && b.visibility <= a.visibility + 3.0 * std::hypot(a.std_error, b.std_error);
            }
        }
        const double last = sweep.points.back().visibility;
        o.require(all_ok && monotone && last <= 0.02,
                  fmt("mismatch sweep monotone, V(1 mm) = %.4f (<= 0.02), V(0) = %.4f", last,
                      sweep.points.front().visibility));
    }

    {
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi), relax(900.0, 6000.0);
        bool ok = true;
        for (int k = 1; k <= 9; ++k) {
            const double v = 0.1 * k;
            const double theta0 = phase(rng), tr = relax(rng);
            std::mt19937_64 noise(100 + k);
            ScanResult scan;
            for (int i = 0; i < 150; ++i) {
                const double t = 900.0 * i / 149.0;
                const double ph = 6.0 * kPi * (1.0 - std::exp(-t / tr)) / (1.0 - std::exp(-900.0 / tr));
                const double mu = 600.0 * (1.0 + v * std::cos(ph + theta0));
                std::poisson_distribution<std::int64_t> p(mu);
                scan.points.push_back({t, mu, p(noise), 0.0});
            }
            const double vhat = fit(scan).visibility;
            const auto boot = bootstrap(
                scan, [](const ScanResult& x) { return fringe_parameters(fit(x)); }, 200,
                RngStream{1012, static_cast<std::uint64_t>(k)});
            ok = ok && std::abs(vhat - v) < 3.0 * boot.std_error[0];
        }
        o.require(ok, "fit round-trip V = 0.1..0.9 within 3 bootstrap sigma");
    }

    {
        auto s = scan_settings(20);
        s.trials = 20000;
        const Apparatus app = preset_config(Scenario::pump_mz).app;
        const auto a = phase_scan(app, kDiode, DriftModel{}, s, RngStream{1013, 0}, Execution{1});
        const auto b = phase_scan(app, kDiode, DriftModel{}, s, RngStream{1013, 0}, Execution{4});
        const auto c = phase_scan(app, kDiode, DriftModel{}, s, RngStream{1013, 0}, Execution{1});
        bool same = true;
        for (std::size_t i = 0; i < a.points.size(); ++i)
            same = same && a.points[i].rate == b.points[i].rate && a.points[i].counts == b.points[i].counts &&
                   a.points[i].rate == c.points[i].rate && a.points[i].counts == c.points[i].counts;
        o.require(same, "bit-identical reruns for 1 and 4 workers");
    }
    return o;
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 two-photon fringe law, intermediate regime", eq2_reproduction},
        {"2 Franson limit", franson_limit},
        {"3 time-bin limit", timebin_limit},
        {"4 unbalanced PDC interferometer washout", washout},
        {"5 split-ratio law", split_law},
        {"6 imperfection scaling", imperfection_scaling},
        {"7 HOM dip", hom_dip},
        {"8 Michelson comb", michelson_comb},
        {"9 power bookkeeping", power_bookkeeping},
        {"10 property suites", property_suites},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += !o.pass;
        std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
