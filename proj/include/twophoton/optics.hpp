#pragma once

// Elementary linear optics: amplitudes, beamsplitters, filter spectra and
// their delay-domain correlation functions.

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <utility>

#include "twophoton/errors.hpp"

namespace twophoton {

using Amplitude = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0; // m/s
inline constexpr double kPi = std::numbers::pi;

enum class SpectralShape { gaussian, rectangular };

inline std::string to_string(SpectralShape s)
{
    return s == SpectralShape::gaussian ? "gaussian" : "rectangular";
}

// Intensity transmission profile of a bandpass filter, specified in wavelength.
struct SpectralProfile {
    SpectralShape shape = SpectralShape::gaussian;
    double center_wavelength = 814e-9; // m
    double fwhm_wavelength = 10e-9;    // m

    void validate() const
    {
        if (!(center_wavelength > 0.0) || !(fwhm_wavelength > 0.0) || !std::isfinite(center_wavelength) ||
            !std::isfinite(fwhm_wavelength))
            throw DomainError("spectral profile: wavelengths must be positive and finite");
        if (!(fwhm_wavelength < center_wavelength))
            throw DomainError("spectral profile: fwhm must be smaller than the center wavelength");
    }

    // FWHM in optical frequency, first order in fwhm/center.
    double frequency_fwhm() const
    {
        return kSpeedOfLight * fwhm_wavelength / (center_wavelength * center_wavelength);
    }

    // Delay scale of dip_envelope. Gaussian: g = exp(-(delta/sigma)^2) with
    // sigma = 2 sqrt(ln 2) / (pi dnu), the exact transform of a Gaussian
    // spectrum of FWHM dnu. Rectangular: g = sin(x)/x with x = delta/scale,
    // scale = 1 / (pi dnu).
    double envelope_time_scale() const
    {
        const double dnu = frequency_fwhm();
        if (shape == SpectralShape::gaussian)
            return 2.0 * std::sqrt(std::log(2.0)) / (kPi * dnu);
        return 1.0 / (kPi * dnu);
    }
};

// Fraction of power taken from the short arm of an unbalanced interferometer.
class SplitRatio {
public:
    constexpr SplitRatio() = default;
    explicit SplitRatio(double short_power_fraction) : fraction_(short_power_fraction)
    {
        if (!(short_power_fraction > 0.0 && short_power_fraction < 1.0))
            throw DomainError("split ratio: short_power_fraction must lie in (0,1), got " +
                              std::to_string(short_power_fraction));
    }

    double short_power_fraction() const noexcept { return fraction_; }
    double short_amplitude() const noexcept { return std::sqrt(fraction_); }
    double long_amplitude() const noexcept { return std::sqrt(1.0 - fraction_); }

private:
    double fraction_ = 0.5;
};

// Lossless symmetric beamsplitter, i on reflection:
//   out1 = sqrt(t) in1 + i sqrt(r) in2,  out2 = i sqrt(r) in1 + sqrt(t) in2.
inline std::pair<Amplitude, Amplitude> beamsplitter(Amplitude in1, Amplitude in2, double reflectance)
{
    if (!(reflectance >= 0.0 && reflectance <= 1.0))
        throw DomainError("beamsplitter: reflectance must lie in [0,1]");
    const double t = std::sqrt(1.0 - reflectance);
    const Amplitude ir{0.0, std::sqrt(reflectance)};
    return {t * in1 + ir * in2, ir * in1 + t * in2};
}

// Normalized Fourier transform of the filter intensity spectrum at delay
// delta (seconds). Equals 1 at zero, even, bounded by 1 in modulus.
inline double dip_envelope(double delta, const SpectralProfile& profile)
{
    const double x = delta / profile.envelope_time_scale();
    if (profile.shape == SpectralShape::gaussian)
        return std::exp(-x * x);
    if (std::abs(x) < 1e-8)
        return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

// L_c = lambda^2 / dlambda.
inline double coherence_length(double linewidth_wavelength, double center_wavelength)
{
    if (!(linewidth_wavelength > 0.0) || !(center_wavelength > 0.0))
        throw DomainError("coherence_length: wavelengths must be positive");
    if (!(linewidth_wavelength < center_wavelength))
        throw DomainError("coherence_length: linewidth must be smaller than the center wavelength");
    return center_wavelength * center_wavelength / linewidth_wavelength;
}

} // namespace twophoton
