#pragma once

// Four-term two-photon amplitude engine, Monte Carlo coincidence rates,
// time-bin gating, and scan drivers (HOM delay scans, drifting phase scans).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "twophoton/errors.hpp"
#include "twophoton/optics.hpp"
#include "twophoton/parallel.hpp"
#include "twophoton/pump.hpp"
#include "twophoton/rng.hpp"
#include "twophoton/scan_result.hpp"

namespace twophoton {

struct PumpInterferometer {
    double imbalance_path = 0.60; // m, c tau_p
    SplitRatio split{0.5};
    double phase = 0.0; // rad, phi_p
    bool enabled = true;
};

struct PdcInterferometer {
    double imbalance_path = 0.60; // m, c tau
    double phase = 0.0;           // rad, two-photon (deBroglie) phase phi
    bool enabled = true;
};

struct TimeGate {
    bool enabled = false;
    int accepted_slot = 1;
    std::optional<double> slot_width; // s; default tau / 4
};

struct Apparatus {
    double pump_wavelength = 407e-9;
    double pdc_wavelength = 814e-9;
    PumpInterferometer pump_mz;
    PdcInterferometer pdc_mz;
    double hom_delay = 0.0; // s, relative signal-idler delay at the HOM beamsplitter
    SpectralProfile filter{SpectralShape::gaussian, 814e-9, 10e-9};
    double baseline_visibility = 1.0; // V0, applied to every cross term
    double background_rate = 0.0;
    double contamination = 0.0; // fraction of unbunched (|L_s S_i>) pairs
    TimeGate gate;

    void validate() const
    {
        if (!(pump_wavelength > 0.0) || !(pdc_wavelength > 0.0))
            throw ConfigError("apparatus: wavelengths must be positive");
        if (!(pump_mz.imbalance_path >= 0.0) || !(pdc_mz.imbalance_path >= 0.0))
            throw ConfigError("apparatus: imbalances must be non-negative");
        if (!std::isfinite(pump_mz.phase) || !std::isfinite(pdc_mz.phase) || !std::isfinite(hom_delay))
            throw ConfigError("apparatus: phases and delays must be finite");
        if (!(baseline_visibility >= 0.0 && baseline_visibility <= 1.0))
            throw ConfigError("apparatus: baseline_visibility must lie in [0,1]");
        if (!(background_rate >= 0.0))
            throw ConfigError("apparatus: background_rate must be non-negative");
        if (!(contamination >= 0.0 && contamination <= 1.0))
            throw ConfigError("apparatus: contamination must lie in [0,1]");
        if (gate.slot_width && !(*gate.slot_width > 0.0))
            throw ConfigError("apparatus: gate slot_width must be positive");
        filter.validate();
    }

    std::string summary() const
    {
        std::ostringstream s;
        s << "pump_mz(" << (pump_mz.enabled ? "on" : "off") << ", cT=" << pump_mz.imbalance_path
          << " m, f=" << pump_mz.split.short_power_fraction() << ", phi_p=" << pump_mz.phase << ") pdc_mz("
          << (pdc_mz.enabled ? "on" : "off") << ", cT=" << pdc_mz.imbalance_path << " m) V0=" << baseline_visibility
          << " filter=" << to_string(filter.shape) << "/" << filter.fwhm_wavelength * 1e9 << "nm"
          << (gate.enabled ? " gate=slot" + std::to_string(gate.accepted_slot) : "");
        return s.str();
    }
};

// Two-photon phase accumulated by the N00N state for a path change in the
// PDC interferometer: one fringe per pump wavelength (lambda_pdc / 2).
inline double noon_phase_from_path(const Apparatus& app, double path_change)
{
    return 2.0 * (2.0 * kPi * path_change / app.pdc_wavelength);
}

enum class TermLabel { Sp_LL, Lp_SS, Sp_SS, Lp_LL };

inline std::string to_string(TermLabel l)
{
    switch (l) {
    case TermLabel::Sp_LL: return "Sp_LL";
    case TermLabel::Lp_SS: return "Lp_SS";
    case TermLabel::Sp_SS: return "Sp_SS";
    case TermLabel::Lp_LL: return "Lp_LL";
    }
    return "?";
}

struct TermAmplitude {
    TermLabel label = TermLabel::Sp_SS;
    Amplitude weight;           // split / beamsplitter weight
    int pump_sample_index = 0;  // which of e0, e1, e2 feeds the term
    double extra_phase = 0.0;   // interferometer phase, rad
    int time_slot = 0;          // detection slot relative to the earliest
    bool pump_long = false;
    bool pdc_long = false;
    Amplitude value;            // weight * e_k * exp(i extra_phase)
};

// Terms of the output state contributing to a D1-D2 coincidence. Four with
// the pump interferometer in place, two (short-short, long-long) without.
inline std::vector<TermAmplitude> four_term_amplitudes(const Apparatus& app, const FieldSamples& fields)
{
    const double pump_short = app.pump_mz.enabled ? app.pump_mz.split.short_amplitude() : 1.0;
    const double pump_long = app.pump_mz.split.long_amplitude();
    const double pdc = app.pdc_mz.enabled ? 1.0 / std::sqrt(2.0) : 1.0;

    std::vector<TermAmplitude> terms;
    terms.reserve(4);
    auto add = [&](TermLabel label, bool p_long, bool d_long) {
        TermAmplitude t;
        t.label = label;
        t.pump_long = p_long;
        t.pdc_long = d_long;
        t.weight = (p_long ? pump_long : pump_short) * pdc;
        t.pump_sample_index = int(p_long) + int(d_long);
        t.time_slot = t.pump_sample_index;
        t.extra_phase = (p_long ? app.pump_mz.phase : 0.0) + (d_long ? app.pdc_mz.phase : 0.0);
        t.value = t.weight * fields.at(t.pump_sample_index) * std::polar(1.0, t.extra_phase);
        terms.push_back(t);
    };
    if (app.pdc_mz.enabled)
        add(TermLabel::Sp_LL, false, true);
    if (app.pump_mz.enabled)
        add(TermLabel::Lp_SS, true, false);
    add(TermLabel::Sp_SS, false, false);
    if (app.pump_mz.enabled && app.pdc_mz.enabled)
        add(TermLabel::Lp_LL, true, true);
    return terms;
}

// Delay used to sample the pump on the e0/e1/e2 grid. With both
// interferometers present the PDC imbalance sets the grid; residual pump
// mismatch is scored through the photon wavepacket overlap.
inline double sampling_delay(const Apparatus& app)
{
    if (app.pdc_mz.enabled)
        return app.pdc_mz.imbalance_path / kSpeedOfLight;
    if (app.pump_mz.enabled)
        return app.pump_mz.imbalance_path / kSpeedOfLight;
    return 0.0;
}

inline double residual_delay(const Apparatus& app, const TermAmplitude& t)
{
    if (!t.pump_long || !app.pdc_mz.enabled)
        return 0.0;
    return (app.pump_mz.imbalance_path - app.pdc_mz.imbalance_path) / kSpeedOfLight;
}

// Coincidence amplitude at the monitored D1/D2 port pair. The output coupler
// projection flips the sign of PDC long-path amplitudes, which puts the
// coincidence minimum at phi_p = phi: R = 1 - 1/2 cos(phi_p - phi).
inline Amplitude coincidence_amplitude(const TermAmplitude& t) { return t.pdc_long ? -t.value : t.value; }

inline double slot_width(const Apparatus& app)
{
    return app.gate.slot_width.value_or(0.25 * sampling_delay(app));
}

namespace detail {

// Rate of one realization from the given terms, without background.
// Normalized so that the incoherent sum has unit mean; V0 scales the cross
// terms only.
inline double realization_rate(const Apparatus& app, const std::vector<TermAmplitude>& terms, double unbunched)
{
    double incoherent = 0.0;
    double cross = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const Amplitude ai = coincidence_amplitude(terms[i]);
        incoherent += std::norm(ai);
        for (std::size_t j = i + 1; j < terms.size(); ++j) {
            const double envelope =
                dip_envelope(residual_delay(app, terms[i]) - residual_delay(app, terms[j]), app.filter);
            cross += 2.0 * std::real(ai * std::conj(coincidence_amplitude(terms[j]))) * envelope;
        }
    }
    const double pure = incoherent + app.baseline_visibility * cross;
    return (1.0 - unbunched) * pure + unbunched * incoherent;
}

// Fraction of pairs that are not bunched by the HOM beamsplitter.
inline double unbunched_fraction(const Apparatus& app)
{
    const double hom = 0.5 * (1.0 - dip_envelope(app.hom_delay, app.filter));
    return app.contamination + (1.0 - app.contamination) * hom;
}

inline bool in_gate(const Apparatus& app, const Pulsed& pulse, double clock_time)
{
    const double centre = app.gate.accepted_slot * sampling_delay(app);
    double d = std::fmod(clock_time - centre, pulse.period);
    if (d > 0.5 * pulse.period)
        d -= pulse.period;
    if (d < -0.5 * pulse.period)
        d += pulse.period;
    return std::abs(d) <= 0.5 * slot_width(app);
}

inline void check_gate(const Apparatus& app, const PumpModel& pump)
{
    const auto* pulse = std::get_if<Pulsed>(&pump);
    if (!pulse)
        throw ConfigError("time gate requires a pulsed pump (no starting clock for a CW pump)");
    const double tau = sampling_delay(app);
    if (!(tau > pulse->pulse_fwhm))
        throw ConfigError("time gate: slots unresolvable, tau must exceed the pulse FWHM");
    if (app.gate.accepted_slot < 0 || app.gate.accepted_slot > 2)
        throw ConfigError("time gate: accepted_slot must be 0, 1 or 2");
    const double w = slot_width(app);
    if (!(w > pulse->pulse_fwhm))
        throw ConfigError("time gate: slot_width must exceed the pulse FWHM");
    // Slot windows must not overlap, including across the pulse period.
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b) {
            const double sep = std::fmod((b - a) * tau, pulse->period);
            if (std::min(sep, pulse->period - sep) < w)
                throw ConfigError("time gate: detection slots overlap for this tau, period and slot_width");
        }
}

} // namespace detail

struct GatedRate {
    RateEstimate rate;           // accepted events only
    RateEstimate ungated;        // same realizations, no gate
    double acceptance_fraction = 0.0;
};

// Gated coincidence rate for a pulsed pump: only detection events in the
// accepted time slot, and only terms from that slot, contribute.
inline GatedRate gated_coincidence_rate(const Apparatus& app, const PumpModel& pump, std::size_t trials,
                                        RngStream stream, Execution exec = {})
{
    app.validate();
    validate(pump);
    if (!app.gate.enabled)
        throw ConfigError("gated_coincidence_rate: gate is not enabled");
    detail::check_gate(app, pump);
    if (trials < 2)
        throw DomainError("gated_coincidence_rate: at least two trials required");

    const auto& pulse = std::get<Pulsed>(pump);
    const double tau = sampling_delay(app);
    const double unbunched = detail::unbunched_fraction(app);
    const auto m = monte_carlo<2>(trials, stream, exec, [&](PhiloxEngine& engine) {
        const FieldSamples f = sample_field(pump, tau, engine);
        const auto terms = four_term_amplitudes(app, f);
        const double all = detail::realization_rate(app, terms, unbunched);
        double gated = 0.0;
        if (detail::in_gate(app, pulse, *f.clock_time)) {
            std::vector<TermAmplitude> kept;
            for (const auto& t : terms)
                if (t.time_slot == app.gate.accepted_slot)
                    kept.push_back(t);
            gated = detail::realization_rate(app, kept, unbunched);
        }
        return std::array<double, 2>{gated, all};
    });
    GatedRate out;
    const auto [g, gse] = mean_and_stderr(m, 0);
    const auto [u, use] = mean_and_stderr(m, 1);
    // Accidentals are uniform in time; the gate keeps its duty cycle of them.
    const double gated_background = app.background_rate * slot_width(app) / pulse.period;
    out.rate = {g + gated_background, gse};
    out.ungated = {u + app.background_rate, use};
    out.acceptance_fraction = out.ungated.value > 0.0 ? out.rate.value / out.ungated.value : 0.0;
    return out;
}

// Monte Carlo mean of |sum of coincidence amplitudes|^2 over pump realizations.
inline RateEstimate coincidence_rate(const Apparatus& app, const PumpModel& pump, std::size_t trials,
                                     RngStream stream, Execution exec = {})
{
    app.validate();
    validate(pump);
    if (app.gate.enabled) {
        detail::check_gate(app, pump);
        return gated_coincidence_rate(app, pump, trials, stream, exec).rate;
    }
    if (trials < 2)
        throw DomainError("coincidence_rate: at least two trials required");
    const double tau = sampling_delay(app);
    const double unbunched = detail::unbunched_fraction(app);
    const auto m = monte_carlo<1>(trials, stream, exec, [&](PhiloxEngine& engine) {
        const FieldSamples f = sample_field(pump, tau, engine);
        return std::array<double, 1>{detail::realization_rate(app, four_term_amplitudes(app, f), unbunched)};
    });
    const auto [mean, se] = mean_and_stderr(m, 0);
    return {mean + app.background_rate, se};
}

// Expected rate from g1_analytic: E[e_k conj(e_l)] = g1((l - k) tau). Pulsed
// pumps are treated as slot-resolved, so only same-slot terms interfere.
inline double analytic_rate(const Apparatus& app, const PumpModel& pump)
{
    app.validate();
    validate(pump);
    const double tau_path = sampling_delay(app) * kSpeedOfLight;
    const bool pulsed = std::holds_alternative<Pulsed>(pump);
    if (app.gate.enabled)
        detail::check_gate(app, pump);

    FieldSamples unit;
    auto terms = four_term_amplitudes(app, unit);
    if (app.gate.enabled)
        std::erase_if(terms, [&](const TermAmplitude& t) { return t.time_slot != app.gate.accepted_slot; });

    const double unbunched = detail::unbunched_fraction(app);
    double incoherent = 0.0;
    double cross = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const Amplitude ai = coincidence_amplitude(terms[i]);
        incoherent += std::norm(ai);
        for (std::size_t j = i + 1; j < terms.size(); ++j) {
            const int ki = terms[i].pump_sample_index;
            const int kj = terms[j].pump_sample_index;
            Amplitude corr;
            if (pulsed)
                corr = ki == kj ? Amplitude{1.0, 0.0} : Amplitude{0.0, 0.0};
            else
                corr = g1_analytic(pump, (kj - ki) * tau_path);
            const double envelope =
                dip_envelope(residual_delay(app, terms[i]) - residual_delay(app, terms[j]), app.filter);
            cross += 2.0 * std::real(ai * std::conj(coincidence_amplitude(terms[j])) * corr) * envelope;
        }
    }
    const double pure = incoherent + app.baseline_visibility * cross;
    double background = app.background_rate;
    if (app.gate.enabled)
        background *= slot_width(app) / std::get<Pulsed>(pump).period;
    return (1.0 - unbunched) * pure + unbunched * incoherent + background;
}

// Visibility of a full phi scan at fixed phi_p, from the first Fourier
// component of analytic_rate in phi.
inline double expected_fringe_visibility(const Apparatus& app, const PumpModel& pump)
{
    Apparatus a = app;
    double mean = 0.0;
    Amplitude first{0.0, 0.0};
    constexpr int n = 8;
    for (int k = 0; k < n; ++k) {
        const double phi = 2.0 * kPi * k / n;
        a.pdc_mz.phase = phi;
        const double r = analytic_rate(a, pump);
        mean += r / n;
        first += r * std::polar(1.0, -phi) * (2.0 / n);
    }
    return mean > 0.0 ? std::abs(first) / mean : 0.0;
}

// Fraction of the pump power reaching the crystal: one output port of the
// pump interferometer's recombining 50/50 beamsplitter with incoherent arms.
inline double delivered_pump_fraction(const Apparatus& app)
{
    if (!app.pump_mz.enabled)
        return 1.0;
    const double a = app.pump_mz.split.short_amplitude();
    const double b = app.pump_mz.split.long_amplitude();
    return 0.5 * (a * a + b * b);
}

struct CountSynthesis {
    double rate_scale = 300.0; // counts/s at unit rate
    double dwell = 5.0;        // s per point
    RngStream stream{};
};

namespace detail {

inline std::int64_t poisson_counts(double mean, RngStream stream)
{
    if (!(mean > 0.0))
        return 0;
    PhiloxEngine engine(stream, 0xC0u);
    std::poisson_distribution<std::int64_t> poisson(mean);
    return poisson(engine);
}

} // namespace detail

// HOM dip: rate(delta) = 1 - V * dip_envelope(delta), Poisson counts.
inline ScanResult hom_scan(const Apparatus& app, const std::vector<double>& delay_grid, double injected_visibility,
                           const CountSynthesis& counts)
{
    app.filter.validate();
    if (!(injected_visibility >= 0.0 && injected_visibility <= 1.0))
        throw DomainError("hom_scan: injected visibility must lie in [0,1]");
    if (!std::is_sorted(delay_grid.begin(), delay_grid.end()))
        throw DomainError("hom_scan: delay grid must be sorted");
    ScanResult scan;
    scan.scenario = "hom";
    scan.x_label = "delay_s";
    scan.meta.seed = counts.stream.seed;
    scan.meta.apparatus_summary = app.summary();
    scan.meta.dwell = counts.dwell;
    scan.meta.rate_scale = counts.rate_scale;
    for (std::size_t i = 0; i < delay_grid.size(); ++i) {
        const double rate = 1.0 - injected_visibility * dip_envelope(delay_grid[i], app.filter);
        const auto n = detail::poisson_counts(rate * counts.rate_scale * counts.dwell, counts.stream.split(i));
        scan.points.push_back({delay_grid[i], rate, n, 0.0});
    }
    return scan;
}

// Passive thermal phase drift: phi(t) = start + span (1 - e^{-t/T}) / (1 - e^{-D/T}),
// i.e. phi_total (1 - exp(-t / relax_time)) normalized to sweep `span_phase`
// over `duration`. relax_time <= 0 gives a linear drift.
struct DriftModel {
    double span_phase = 6.0 * kPi; // ~3 deBroglie periods over the scan
    double relax_time = 2700.0;    // s
    double start_phase = 0.0;

    double phase_at(double t, double duration) const
    {
        if (relax_time <= 0.0 || !std::isfinite(relax_time))
            return start_phase + span_phase * t / duration;
        return start_phase + span_phase * (1.0 - std::exp(-t / relax_time)) / (1.0 - std::exp(-duration / relax_time));
    }

    static DriftModel linear(double span_phase, double start_phase = 0.0) { return {span_phase, 0.0, start_phase}; }
};

struct PhaseScanSettings {
    double duration = 900.0; // s
    std::size_t points = 180;
    std::size_t trials = 100000; // per point
    double rate_scale = 300.0;   // counts/s at unit delivered rate
};

// Coincidence counts while the PDC phase drifts. Recorded rate is the
// normalized coincidence rate times the delivered pump fraction; counts are
// Poisson(rate * rate_scale * dwell) with dwell = duration / points.
inline ScanResult phase_scan(const Apparatus& app, const PumpModel& pump, const DriftModel& drift,
                             const PhaseScanSettings& settings, RngStream stream, Execution exec = {})
{
    if (!(settings.duration > 0.0))
        throw DomainError("phase_scan: duration must be positive");
    if (settings.points < 10)
        throw DomainError("phase_scan: at least 10 points required");
    app.validate();
    validate(pump);
    if (app.gate.enabled)
        detail::check_gate(app, pump);

    const double dwell = settings.duration / static_cast<double>(settings.points);
    const double power = delivered_pump_fraction(app);
    ScanResult scan;
    scan.x_label = "time_s";
    scan.meta.seed = stream.seed;
    scan.meta.trials = settings.trials;
    scan.meta.apparatus_summary = app.summary() + " pump=" + describe(pump);
    scan.meta.dwell = dwell;
    scan.meta.rate_scale = settings.rate_scale;

    double gated_sum = 0.0, ungated_sum = 0.0;
    for (std::size_t i = 0; i < settings.points; ++i) {
        const double t = static_cast<double>(i) * dwell;
        Apparatus a = app;
        a.pdc_mz.phase = drift.phase_at(t, settings.duration);
        const RngStream point_stream = stream.split(i);
        RateEstimate r;
        if (a.gate.enabled) {
            const GatedRate g = gated_coincidence_rate(a, pump, settings.trials, point_stream, exec);
            r = g.rate;
            gated_sum += g.rate.value;
            ungated_sum += g.ungated.value;
        } else {
            r = coincidence_rate(a, pump, settings.trials, point_stream, exec);
        }
        const double rate = std::max(0.0, r.value) * power;
        const auto n = detail::poisson_counts(rate * settings.rate_scale * dwell, point_stream.split(0xC0FFEEu));
        scan.points.push_back({t, rate, n, r.std_error * power});
    }
    if (app.gate.enabled && ungated_sum > 0.0)
        scan.meta.acceptance_fraction = gated_sum / ungated_sum;
    return scan;
}

inline double mean_rate_ratio(const ScanResult& with_pump_mz, const ScanResult& without)
{
    const double denom = without.mean_rate();
    if (!(denom > 0.0))
        throw DomainError("mean_rate_ratio: reference scan has zero mean rate");
    return with_pump_mz.mean_rate() / denom;
}

} // namespace twophoton
