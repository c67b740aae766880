#pragma once

// Statistical models of the pump field: stochastic envelope samples at the
// three retarded times t', t'-tau, t'-2tau, analytic and Monte Carlo
// first-order coherence, and first-order interferometer characterisation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "twophoton/errors.hpp"
#include "twophoton/optics.hpp"
#include "twophoton/parallel.hpp"
#include "twophoton/rng.hpp"
#include "twophoton/scan_result.hpp"

namespace twophoton {

// Infinite coherence length CW laser.
struct Coherent {};

// CW laser with Wiener-process phase: |g1(d)| = exp(-d / coherence_length).
struct PhaseDiffusion {
    double coherence_length = 1.65649e-3; // m
};

// Multimode diode: randomly phased longitudinal modes spaced c/peak_spacing_path
// with Gaussian power envelope, each mode phase-diffusing independently.
struct MultimodeComb {
    double peak_spacing_path = 4705.5e-6;       // m, 2L of the laser cavity
    int mode_count = 3;
    double envelope_fwhm_wavelength = 0.1e-9;   // m
    double mode_linewidth_path = 0.8;           // m, per-mode coherence length
    double center_wavelength = 407e-9;          // m
};

// Transform-limited Gaussian pulse train; every pulse has an independent phase.
struct Pulsed {
    double pulse_fwhm = 1e-12; // s, intensity FWHM
    double period = 12.5e-9;   // s
};

using PumpModel = std::variant<Coherent, PhaseDiffusion, MultimodeComb, Pulsed>;

inline std::string describe(const PumpModel& model)
{
    return std::visit(
        [](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            char buf[128];
            if constexpr (std::is_same_v<T, Coherent>)
                return "coherent";
            else if constexpr (std::is_same_v<T, PhaseDiffusion>)
                std::snprintf(buf, sizeof buf, "phase_diffusion(L_c=%g m)", m.coherence_length);
            else if constexpr (std::is_same_v<T, MultimodeComb>)
                std::snprintf(buf, sizeof buf, "multimode_comb(spacing=%g m, modes=%d, mode_L=%g m)",
                              m.peak_spacing_path, static_cast<int>(m.mode_count), m.mode_linewidth_path);
            else
                std::snprintf(buf, sizeof buf, "pulsed(fwhm=%g s, period=%g s)", m.pulse_fwhm, m.period);
            return buf;
        },
        model);
}

inline void validate(const PumpModel& model)
{
    std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, PhaseDiffusion>) {
                if (!(m.coherence_length > 0.0))
                    throw ConfigError("phase_diffusion: coherence_length must be positive");
            } else if constexpr (std::is_same_v<T, MultimodeComb>) {
                if (!(m.peak_spacing_path > 0.0) || !(m.envelope_fwhm_wavelength > 0.0) ||
                    !(m.mode_linewidth_path > 0.0) || !(m.center_wavelength > 0.0))
                    throw ConfigError("multimode_comb: lengths must be positive");
                if (m.mode_count < 1)
                    throw ConfigError("multimode_comb: mode_count must be at least 1");
            } else if constexpr (std::is_same_v<T, Pulsed>) {
                if (!(m.pulse_fwhm > 0.0) || !(m.period > 0.0))
                    throw ConfigError("pulsed: pulse_fwhm and period must be positive");
                if (!(m.pulse_fwhm < m.period))
                    throw ConfigError("pulsed: pulse_fwhm must be shorter than the period");
            }
        },
        model);
}

// Pump envelope at t', t'-tau, t'-2tau (unit mean-square modulus). For a
// pulsed pump, clock_time is the detection time t' modulo the pulse period.
struct FieldSamples {
    Amplitude e0{1.0, 0.0};
    Amplitude e1{1.0, 0.0};
    Amplitude e2{1.0, 0.0};
    std::optional<double> clock_time;

    Amplitude at(int index) const { return index == 0 ? e0 : (index == 1 ? e1 : e2); }
};

namespace detail {

inline double gaussian_step(PhiloxEngine& engine, double variance)
{
    if (variance <= 0.0)
        return 0.0;
    std::normal_distribution<double> normal(0.0, std::sqrt(variance));
    return normal(engine);
}

inline Amplitude unit_phasor(double phase) { return std::polar(1.0, phase); }

struct CombModes {
    std::vector<double> offset; // mode index relative to the envelope center
    std::vector<double> power;  // normalized to unit sum
};

inline CombModes comb_modes(const MultimodeComb& m)
{
    CombModes modes;
    const double mode_spacing_wavelength = m.center_wavelength * m.center_wavelength / m.peak_spacing_path;
    double total = 0.0;
    for (int k = 0; k < m.mode_count; ++k) {
        const double offset = k - 0.5 * (m.mode_count - 1);
        const double x = offset * mode_spacing_wavelength / m.envelope_fwhm_wavelength;
        const double p = std::exp(-4.0 * std::log(2.0) * x * x);
        modes.offset.push_back(offset);
        modes.power.push_back(p);
        total += p;
    }
    for (auto& p : modes.power)
        p /= total;
    return modes;
}

// Sum over modes of p_k exp(i 2 pi offset_k d / spacing), no per-mode decay.
inline Amplitude comb_structure(const MultimodeComb& m, double delay_path)
{
    const auto modes = comb_modes(m);
    Amplitude s{0.0, 0.0};
    for (std::size_t k = 0; k < modes.power.size(); ++k)
        s += modes.power[k] * unit_phasor(2.0 * kPi * modes.offset[k] * delay_path / m.peak_spacing_path);
    return s;
}

inline double pulse_sigma(const Pulsed& p) { return p.pulse_fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0))); }

// Normalized intensity profile of one pulse, periodized over the train.
inline double periodic_intensity(const Pulsed& p, double t)
{
    const double sigma = pulse_sigma(p);
    const double reach = 12.0 * sigma;
    const auto first = static_cast<long long>(std::ceil((t - reach) / p.period));
    const auto last = static_cast<long long>(std::floor((t + reach) / p.period));
    double q = 0.0;
    for (long long n = first; n <= last; ++n) {
        const double u = (t - static_cast<double>(n) * p.period) / sigma;
        q += std::exp(-0.5 * u * u);
    }
    return q / (sigma * std::sqrt(2.0 * kPi));
}

class PulseTrain {
public:
    PulseTrain(const Pulsed& p, PhiloxEngine& engine) : pulse_(p), engine_(engine) {}

    // Field with time-averaged |A|^2 = 1.
    Amplitude field(double t)
    {
        const double sigma = pulse_sigma(pulse_);
        const double reach = 12.0 * sigma;
        const auto first = static_cast<long long>(std::ceil((t - reach) / pulse_.period));
        const auto last = static_cast<long long>(std::floor((t + reach) / pulse_.period));
        Amplitude a{0.0, 0.0};
        for (long long n = first; n <= last; ++n) {
            const double u = (t - static_cast<double>(n) * pulse_.period) / sigma;
            const double q = std::exp(-0.5 * u * u) / (sigma * std::sqrt(2.0 * kPi));
            a += std::sqrt(pulse_.period * q) * unit_phasor(phase_of(n));
        }
        return a;
    }

private:
    double phase_of(long long n)
    {
        for (const auto& [index, phase] : phases_)
            if (index == n)
                return phase;
        const double phase = 2.0 * kPi * engine_.uniform();
        phases_.emplace_back(n, phase);
        return phase;
    }

    Pulsed pulse_;
    PhiloxEngine& engine_;
    std::vector<std::pair<long long, double>> phases_;
};

inline double wrap_to_period(double t, double period)
{
    double r = std::fmod(t, period);
    if (r < 0.0)
        r += period;
    return r;
}

} // namespace detail

// One stochastic realization of the pump envelope at the three retarded times.
inline FieldSamples sample_field(const PumpModel& model, double tau, PhiloxEngine& engine)
{
    if (!(tau >= 0.0))
        throw DomainError("sample_field: tau must be non-negative");
    return std::visit(
        [&](const auto& m) -> FieldSamples {
            using T = std::decay_t<decltype(m)>;
            FieldSamples f;
            if constexpr (std::is_same_v<T, Coherent>) {
                return f;
            } else if constexpr (std::is_same_v<T, PhaseDiffusion>) {
                const double variance = 2.0 * kSpeedOfLight * tau / m.coherence_length;
                const double phi0 = 2.0 * kPi * engine.uniform();
                const double phi1 = phi0 + detail::gaussian_step(engine, variance);
                const double phi2 = phi1 + detail::gaussian_step(engine, variance);
                f.e0 = detail::unit_phasor(phi0);
                f.e1 = detail::unit_phasor(phi1);
                f.e2 = detail::unit_phasor(phi2);
                return f;
            } else if constexpr (std::is_same_v<T, MultimodeComb>) {
                const auto modes = detail::comb_modes(m);
                const double variance = 2.0 * kSpeedOfLight * tau / m.mode_linewidth_path;
                const double beat = 2.0 * kPi * kSpeedOfLight * tau / m.peak_spacing_path;
                f.e0 = f.e1 = f.e2 = Amplitude{0.0, 0.0};
                for (std::size_t k = 0; k < modes.power.size(); ++k) {
                    const double amp = std::sqrt(modes.power[k]);
                    const double theta = 2.0 * kPi * engine.uniform();
                    const double psi1 = detail::gaussian_step(engine, variance);
                    const double psi2 = psi1 + detail::gaussian_step(engine, variance);
                    const double w = beat * modes.offset[k];
                    f.e0 += amp * detail::unit_phasor(theta);
                    f.e1 += amp * detail::unit_phasor(theta - w + psi1);
                    f.e2 += amp * detail::unit_phasor(theta - 2.0 * w + psi2);
                }
                return f;
            } else {
                // Importance sampling: t' drawn near one of the three detection
                // slots, fields rescaled by 1/sqrt(T h(t')) so that sample
                // averages estimate time averages over the train.
                const int slot = std::min(2, static_cast<int>(3.0 * engine.uniform()));
                std::normal_distribution<double> jitter(0.0, detail::pulse_sigma(m));
                const double t = slot * tau + jitter(engine);
                double density = 0.0;
                for (int s = 0; s < 3; ++s)
                    density += detail::periodic_intensity(m, t - s * tau) / 3.0;
                const double scale = 1.0 / std::sqrt(m.period * density);
                detail::PulseTrain train(m, engine);
                f.e0 = scale * train.field(t);
                f.e1 = scale * train.field(t - tau);
                f.e2 = scale * train.field(t - 2.0 * tau);
                f.clock_time = detail::wrap_to_period(t, m.period);
                return f;
            }
        },
        model);
}

inline FieldSamples sample_field(const PumpModel& model, double tau, RngStream stream)
{
    PhiloxEngine engine(stream);
    return sample_field(model, tau, engine);
}

// Normalized first-order coherence g1(d) = <E(t + d/c) E*(t)>. Negative delays
// are evaluated by conjugate symmetry.
inline Amplitude g1_analytic(const PumpModel& model, double delay_path)
{
    if (delay_path < 0.0)
        return std::conj(g1_analytic(model, -delay_path));
    return std::visit(
        [&](const auto& m) -> Amplitude {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Coherent>) {
                return {1.0, 0.0};
            } else if constexpr (std::is_same_v<T, PhaseDiffusion>) {
                return {std::exp(-delay_path / m.coherence_length), 0.0};
            } else if constexpr (std::is_same_v<T, MultimodeComb>) {
                return std::exp(-delay_path / m.mode_linewidth_path) * detail::comb_structure(m, delay_path);
            } else {
                const double s = delay_path / kSpeedOfLight / detail::pulse_sigma(m);
                return {std::exp(-s * s / 8.0), 0.0};
            }
        },
        model);
}

struct G1Estimate {
    Amplitude value;
    double std_error = 0.0;
};

// Ensemble average of e(t+tau) conj(e(t)).
inline G1Estimate g1_estimate(const PumpModel& model, double delay_path, std::size_t trials, RngStream stream,
                              Execution exec = {})
{
    if (trials < 100)
        throw DomainError("g1_estimate: at least 100 trials required");
    const double tau = std::abs(delay_path) / kSpeedOfLight;
    const auto m = monte_carlo<2>(trials, stream, exec, [&](PhiloxEngine& engine) {
        const FieldSamples f = sample_field(model, tau, engine);
        const Amplitude c = f.e0 * std::conj(f.e1);
        return std::array<double, 2>{c.real(), c.imag()};
    });
    const auto [re, se_re] = mean_and_stderr(m, 0);
    const auto [im, se_im] = mean_and_stderr(m, 1);
    G1Estimate est{{re, im}, std::hypot(se_re, se_im)};
    if (delay_path < 0.0)
        est.value = std::conj(est.value);
    return est;
}

// Fringe visibility of a two-arm interferometer fed by the pump: 2ab|g1|.
inline double first_order_mz_visibility(const PumpModel& model, double imbalance_path, SplitRatio split)
{
    return 2.0 * split.short_amplitude() * split.long_amplitude() * std::abs(g1_analytic(model, imbalance_path));
}

// Monte Carlo output intensity |a e(t) + b e(t - tau) e^{i phase}|^2 of a
// two-arm interferometer, normalized to a^2 + b^2 = 1.
inline RateEstimate first_order_intensity(const PumpModel& model, double imbalance_path, SplitRatio split,
                                          double phase, std::size_t trials, RngStream stream, Execution exec = {})
{
    const double tau = imbalance_path / kSpeedOfLight;
    const double a = split.short_amplitude();
    const Amplitude b = split.long_amplitude() * std::polar(1.0, phase);
    const auto m = monte_carlo<1>(trials, stream, exec, [&](PhiloxEngine& engine) {
        const FieldSamples f = sample_field(model, tau, engine);
        return std::array<double, 1>{std::norm(a * f.e0 + b * f.e1)};
    });
    const auto [mean, se] = mean_and_stderr(m, 0);
    return {mean, se};
}

// Per-mode coherence length that makes first_order_mz_visibility equal
// `target` at `imbalance_path` for an otherwise fixed comb.
inline double calibrated_mode_linewidth(const MultimodeComb& comb, double imbalance_path, SplitRatio split,
                                        double target_visibility)
{
    const double ceiling = 2.0 * split.short_amplitude() * split.long_amplitude() *
                           std::abs(detail::comb_structure(comb, imbalance_path));
    if (!(target_visibility > 0.0 && target_visibility < ceiling))
        throw DomainError("calibrated_mode_linewidth: target visibility not reachable (ceiling " +
                          std::to_string(ceiling) + ")");
    return -imbalance_path / std::log(target_visibility / ceiling);
}

// 407 nm diode defaults: measured peak spacing and linewidth envelope, with the
// per-mode coherence length fitted to the ~8% first-order visibility seen at a
// 60 cm imbalance with a 60/40 split.
inline MultimodeComb default_diode_comb()
{
    MultimodeComb comb;
    comb.mode_linewidth_path = calibrated_mode_linewidth(comb, 0.60, SplitRatio(0.6), 0.08);
    return comb;
}

struct MichelsonScan {
    ScanResult scan;
    std::vector<double> peak_positions; // interior local maxima of |g1|, m
    std::optional<double> peak_spacing; // m
};

// |g1| over a delay grid, with a peak-finding pass for recurring maxima.
inline MichelsonScan michelson_scan(const PumpModel& model, const std::vector<double>& delay_grid)
{
    if (delay_grid.size() < 2)
        throw DomainError("michelson_scan: grid needs at least two points");
    if (!std::is_sorted(delay_grid.begin(), delay_grid.end()) || delay_grid.front() < 0.0)
        throw DomainError("michelson_scan: grid must be sorted and non-negative");

    MichelsonScan out;
    out.scan.scenario = "michelson";
    out.scan.x_label = "delay_path_m";
    std::vector<double> v;
    v.reserve(delay_grid.size());
    for (double d : delay_grid) {
        const double g = std::abs(g1_analytic(model, d));
        v.push_back(g);
        out.scan.points.push_back({d, g, 0, 0.0});
    }

    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double threshold = *lo + 0.5 * (*hi - *lo);
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        if (!(v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > threshold))
            continue;
        // Parabolic refinement on a locally uniform grid.
        const double h = 0.5 * (delay_grid[i + 1] - delay_grid[i - 1]);
        const double denom = v[i - 1] - 2.0 * v[i] + v[i + 1];
        double shift = 0.0;
        if (denom < 0.0)
            shift = 0.5 * (v[i - 1] - v[i + 1]) / denom * h;
        out.peak_positions.push_back(delay_grid[i] + shift);
    }

    const auto& p = out.peak_positions;
    if (p.size() == 1) {
        out.peak_spacing = p.front();
    } else if (p.size() >= 2) {
        // Least-squares slope of position against peak order.
        const double n = static_cast<double>(p.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double x = static_cast<double>(k);
            sx += x;
            sy += p[k];
            sxx += x * x;
            sxy += x * p[k];
        }
        out.peak_spacing = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return out;
}

} // namespace twophoton
