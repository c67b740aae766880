#pragma once

// Visibility extraction from scans: sinusoidal fringe fits with linear or
// drift-stretched phase, HOM dip fits, and Poisson bootstrap errors.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "twophoton/errors.hpp"
#include "twophoton/levenberg_marquardt.hpp"
#include "twophoton/optics.hpp"
#include "twophoton/parallel.hpp"
#include "twophoton/rng.hpp"
#include "twophoton/scan_result.hpp"

namespace twophoton {

inline double visibility_of(double max_rate, double min_rate)
{
    if (!(min_rate >= 0.0) || !(max_rate >= min_rate) || !(max_rate > 0.0))
        throw DomainError("visibility_of: requires max >= min >= 0 and max > 0");
    return (max_rate - min_rate) / (max_rate + min_rate);
}

enum class PhaseModel { linear, stretched };

struct FringeFit {
    double visibility = 0.0;
    double mean_rate = 0.0;    // fitted baseline B, counts per point
    double phase_offset = 0.0; // theta_0 at the scan midpoint
    // theta(t) = rate (t - t_mid) + curvature (t - t_mid)^2
    std::array<double, 2> phase_model_coeffs{};
    double reference_time = 0.0; // t_mid
    double residual_rms = 0.0;   // weighted, per point
    double visibility_stderr = 0.0;
    double fringe_cycles = 0.0;
    int iterations = 0;
    std::vector<double> objective_history; // initial count-weighted pass
    bool at_bound = false; // unconstrained V exceeded 1 within tolerance; refit at V = 1
};

struct FitOptions {
    LmOptions lm{};
    double min_cycles = 1.5;
    // Unconstrained V > 1 by more than this many standard errors is rejected.
    double bound_tolerance_sigma = 3.0;
    // Refits with weights 1 / max(model, 1) after the initial count-weighted pass.
    int reweight_passes = 2;
};

namespace detail {

struct FitData {
    Eigen::VectorXd s; // normalized abscissa in [-1, 1]
    Eigen::VectorXd y;
    Eigen::VectorXd inv_sigma;
    double mid = 0.0;
    double half_span = 1.0;
};

inline FitData prepare(const ScanResult& scan, std::size_t min_points, const char* who)
{
    const std::size_t n = scan.points.size();
    if (n < min_points)
        throw FitError(std::string(who) + ": at least " + std::to_string(min_points) + " points required");
    FitData d;
    double lo = scan.points.front().x, hi = lo;
    for (const auto& p : scan.points) {
        lo = std::min(lo, p.x);
        hi = std::max(hi, p.x);
    }
    if (!(hi > lo))
        throw FitError(std::string(who) + ": scan has zero extent");
    d.mid = 0.5 * (lo + hi);
    d.half_span = 0.5 * (hi - lo);
    d.s.resize(n);
    d.y.resize(n);
    d.inv_sigma.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = scan.points[i];
        d.s[i] = (p.x - d.mid) / d.half_span;
        d.y[i] = static_cast<double>(p.counts);
        d.inv_sigma[i] = 1.0 / std::sqrt(std::max(d.y[i], 1.0));
        total += d.y[i];
    }
    if (!(total > 0.0))
        throw FitError(std::string(who) + ": scan has no counts");
    return d;
}

// Weighted linear least squares of y on [1, cos(ws), sin(ws)]; returns chi^2.
inline double harmonic_lsq(const FitData& d, double omega, Eigen::Vector3d& coeffs)
{
    Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    for (Eigen::Index i = 0; i < d.s.size(); ++i) {
        const double w = d.inv_sigma[i] * d.inv_sigma[i];
        const Eigen::Vector3d row(1.0, std::cos(omega * d.s[i]), std::sin(omega * d.s[i]));
        A += w * row * row.transpose();
        b += w * d.y[i] * row;
    }
    coeffs = A.ldlt().solve(b);
    double chi2 = 0.0;
    for (Eigen::Index i = 0; i < d.s.size(); ++i) {
        const double m = coeffs[0] + coeffs[1] * std::cos(omega * d.s[i]) + coeffs[2] * std::sin(omega * d.s[i]);
        const double r = (m - d.y[i]) * d.inv_sigma[i];
        chi2 += r * r;
    }
    return chi2;
}

} // namespace detail

// Fits counts to B (1 + V cos(theta(t) + theta_0)) with theta linear or
// quadratic in time. The fringe frequency is seeded by a periodogram over
// 1.5 .. N/2 cycles per scan.
inline FringeFit fit_fringe(const ScanResult& scan, PhaseModel model, const FitOptions& options = {})
{
    detail::FitData d = detail::prepare(scan, 10, "fit_fringe");
    const auto n = d.s.size();

    // Cycles over the scan = omega / pi because s spans [-1, 1].
    const double max_cycles = 0.5 * static_cast<double>(n);
    double best_chi2 = std::numeric_limits<double>::infinity();
    double best_omega = 0.0;
    Eigen::Vector3d best_coeffs = Eigen::Vector3d::Zero();
    for (double cycles = options.min_cycles; cycles <= max_cycles; cycles += 0.05) {
        Eigen::Vector3d c;
        const double chi2 = detail::harmonic_lsq(d, kPi * cycles, c);
        if (chi2 < best_chi2) {
            best_chi2 = chi2;
            best_omega = kPi * cycles;
            best_coeffs = c;
        }
    }

    // Parameters: B, C, S, omega, kappa; theta = omega s + kappa s^2.
    auto run = [&](Eigen::VectorXd p0, bool stretched) {
        auto residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
            const Eigen::Index np = stretched ? 5 : 4;
            r.resize(n);
            J.resize(n, np);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double s = d.s[i];
                const double theta = p[3] * s + (stretched ? p[4] * s * s : 0.0);
                const double c = std::cos(theta), sn = std::sin(theta);
                const double w = d.inv_sigma[i];
                r[i] = (p[0] + p[1] * c + p[2] * sn - d.y[i]) * w;
                const double dtheta = -p[1] * sn + p[2] * c;
                J(i, 0) = w;
                J(i, 1) = c * w;
                J(i, 2) = sn * w;
                J(i, 3) = dtheta * s * w;
                if (stretched)
                    J(i, 4) = dtheta * s * s * w;
            }
        };
        return levenberg_marquardt(residuals, std::move(p0), options.lm);
    };

    Eigen::VectorXd p(4);
    p << best_coeffs[0], best_coeffs[1], best_coeffs[2], best_omega;
    LmResult lm = run(p, false);
    std::vector<double> history = lm.objective_history;
    int iterations = lm.iterations;
    if (model == PhaseModel::stretched && lm.converged) {
        Eigen::VectorXd p5(5);
        p5 << lm.params, 0.0;
        lm = run(p5, true);
        history.insert(history.end(), lm.objective_history.begin() + 1, lm.objective_history.end());
        iterations += lm.iterations;
    }

    // Reweight with the fitted model's variance instead of the observed
    // counts, which biases low-count minima downward.
    const bool stretched_fit = model == PhaseModel::stretched && lm.params.size() == 5;
    for (int pass = 0; pass < options.reweight_passes && lm.converged; ++pass) {
        const Eigen::VectorXd& q = lm.params;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double s = d.s[i];
            const double theta = q[3] * s + (stretched_fit ? q[4] * s * s : 0.0);
            const double m = q[0] + q[1] * std::cos(theta) + q[2] * std::sin(theta);
            d.inv_sigma[i] = 1.0 / std::sqrt(std::max(m, 1.0));
        }
        lm = run(lm.params, stretched_fit);
        iterations += lm.iterations;
    }

    std::ostringstream diag;
    diag << "iterations=" << iterations << " objective=" << lm.objective << " status=" << lm.message;
    if (!lm.converged)
        throw FitError("fit_fringe: did not converge", diag.str());

    const Eigen::VectorXd& q = lm.params;
    const double B = q[0];
    const double amp = std::hypot(q[1], q[2]);
    if (!(B > 0.0))
        throw FitError("fit_fringe: non-positive baseline", diag.str());

    FringeFit fit;
    fit.visibility = amp / B;
    fit.mean_rate = B;
    fit.phase_offset = std::atan2(-q[2], q[1]);
    fit.reference_time = d.mid;
    fit.phase_model_coeffs = {q[3] / d.half_span, q.size() > 4 ? q[4] / (d.half_span * d.half_span) : 0.0};
    fit.fringe_cycles = std::abs(q[3]) / kPi;
    fit.residual_rms = std::sqrt(lm.objective / static_cast<double>(n));
    fit.iterations = iterations;
    fit.objective_history = std::move(history);
    if (fit.fringe_cycles < options.min_cycles)
        throw FitError("fit_fringe: scan spans fewer than 1.5 fringe periods", diag.str());

    // Linearized error of V = hypot(C, S) / B.
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(q.size());
    grad[0] = -fit.visibility / B;
    if (amp > 0.0) {
        grad[1] = q[1] / (amp * B);
        grad[2] = q[2] / (amp * B);
    } else {
        grad[1] = grad[2] = 1.0 / B;
    }
    const Eigen::MatrixXd cov = lm.normal_matrix.completeOrthogonalDecomposition().pseudoInverse();
    fit.visibility_stderr = std::sqrt(std::max(0.0, grad.dot(cov * grad)));

    if (fit.visibility > 1.0) {
        if (fit.visibility - 1.0 > options.bound_tolerance_sigma * fit.visibility_stderr)
            throw FitError("fit_fringe: fitted visibility exceeds 1", diag.str());
        // Statistically compatible overshoot: refit on the physical boundary,
        // B (1 + cos(theta + theta_0)).
        const bool stretched = q.size() > 4;
        auto bounded = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
            r.resize(n);
            J.resize(n, stretched ? 4 : 3);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double s = d.s[i];
                const double theta = p[2] * s + (stretched ? p[3] * s * s : 0.0) + p[1];
                const double c = std::cos(theta), sn = std::sin(theta);
                const double w = d.inv_sigma[i];
                r[i] = (p[0] * (1.0 + c) - d.y[i]) * w;
                J(i, 0) = (1.0 + c) * w;
                J(i, 1) = -p[0] * sn * w;
                J(i, 2) = -p[0] * sn * s * w;
                if (stretched)
                    J(i, 3) = -p[0] * sn * s * s * w;
            }
        };
        Eigen::VectorXd pb(stretched ? 4 : 3);
        pb[0] = B;
        pb[1] = fit.phase_offset;
        pb[2] = q[3];
        if (stretched)
            pb[3] = q[4];
        const LmResult lb = levenberg_marquardt(bounded, std::move(pb), options.lm);
        if (!lb.converged || !(lb.params[0] > 0.0))
            throw FitError("fit_fringe: boundary refit did not converge", diag.str());
        fit.visibility = 1.0;
        fit.at_bound = true;
        fit.mean_rate = lb.params[0];
        fit.phase_offset = lb.params[1];
        fit.phase_model_coeffs = {lb.params[2] / d.half_span,
                                  stretched ? lb.params[3] / (d.half_span * d.half_span) : 0.0};
        fit.fringe_cycles = std::abs(lb.params[2]) / kPi;
        fit.residual_rms = std::sqrt(lb.objective / static_cast<double>(n));
        fit.iterations += lb.iterations;
    }
    return fit;
}

enum class DipShape { gaussian, rectangular_fourier };

struct DipFit {
    double visibility = 0.0;
    double center_delay = 0.0; // same units as the scan x
    double width = 0.0;
    double baseline = 0.0;     // counts per point
    double residual_rms = 0.0;
    double visibility_stderr = 0.0;
    int iterations = 0;
};

namespace detail {

inline double dip_shape(DipShape shape, double z)
{
    if (shape == DipShape::gaussian)
        return std::exp(-z * z);
    if (std::abs(z) < 1e-6)
        return 1.0 - z * z / 6.0;
    return std::sin(z) / z;
}

inline double dip_shape_derivative(DipShape shape, double z)
{
    if (shape == DipShape::gaussian)
        return -2.0 * z * std::exp(-z * z);
    if (std::abs(z) < 1e-4)
        return -z / 3.0;
    return (z * std::cos(z) - std::sin(z)) / (z * z);
}

} // namespace detail

// Fits counts to baseline (1 - V g((x - x0) / w)).
inline DipFit fit_dip(const ScanResult& scan, DipShape shape, const FitOptions& options = {})
{
    const detail::FitData d = detail::prepare(scan, 6, "fit_dip");
    const auto n = d.s.size();

    Eigen::Index imin = 0;
    d.y.minCoeff(&imin);
    // Baseline from the outer fifth of the grid on each side.
    double edge_sum = 0.0;
    int edge_n = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(d.s[i]) >= 0.8) {
            edge_sum += d.y[i];
            ++edge_n;
        }
    const double base0 = edge_n > 0 ? edge_sum / edge_n : d.y.mean();
    const double v0 = std::clamp(1.0 - d.y[imin] / std::max(base0, 1.0), 0.05, 1.0);
    // Half-depth half-width, walking outwards from the minimum.
    const double half_level = base0 * (1.0 - 0.5 * v0);
    Eigen::Index hi = imin;
    while (hi + 1 < n && d.y[hi] < half_level)
        ++hi;
    Eigen::Index lo = imin;
    while (lo > 0 && d.y[lo] < half_level)
        --lo;
    double half_width = 0.5 * (d.s[hi] - d.s[lo]);
    if (!(half_width > 0.0))
        half_width = 2.0 / static_cast<double>(n);
    const double z_half = shape == DipShape::gaussian ? std::sqrt(std::log(2.0)) : 1.895494267;
    const double w0 = half_width / z_half;

    auto residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
        r.resize(n);
        J.resize(n, 4);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double z = (d.s[i] - p[2]) / p[3];
            const double g = detail::dip_shape(shape, z);
            const double dg = detail::dip_shape_derivative(shape, z);
            const double w = d.inv_sigma[i];
            r[i] = (p[0] * (1.0 - p[1] * g) - d.y[i]) * w;
            J(i, 0) = (1.0 - p[1] * g) * w;
            J(i, 1) = -p[0] * g * w;
            J(i, 2) = p[0] * p[1] * dg / p[3] * w;
            J(i, 3) = p[0] * p[1] * dg * z / p[3] * w;
        }
    };
    Eigen::VectorXd p(4);
    p << base0, v0, d.s[imin], w0;
    const LmResult lm = levenberg_marquardt(residuals, p, options.lm);

    std::ostringstream diag;
    diag << "iterations=" << lm.iterations << " objective=" << lm.objective << " status=" << lm.message;
    if (!lm.converged)
        throw FitError("fit_dip: did not converge", diag.str());
    const Eigen::VectorXd& q = lm.params;
    if (!(q[0] > 0.0))
        throw FitError("fit_dip: non-positive baseline", diag.str());

    DipFit fit;
    fit.baseline = q[0];
    fit.visibility = q[1];
    fit.center_delay = d.mid + q[2] * d.half_span;
    fit.width = std::abs(q[3]) * d.half_span;
    fit.residual_rms = std::sqrt(lm.objective / static_cast<double>(n));
    fit.iterations = lm.iterations;
    if (!(fit.width > 0.0))
        throw FitError("fit_dip: non-positive width", diag.str());
    const Eigen::MatrixXd cov = lm.normal_matrix.completeOrthogonalDecomposition().pseudoInverse();
    fit.visibility_stderr = std::sqrt(std::max(0.0, cov(1, 1)));
    return fit;
}

inline std::vector<double> fringe_parameters(const FringeFit& f)
{
    return {f.visibility, f.mean_rate, f.phase_offset, f.phase_model_coeffs[0], f.phase_model_coeffs[1]};
}

inline std::vector<double> dip_parameters(const DipFit& f)
{
    return {f.visibility, f.center_delay, f.width, f.baseline};
}

struct BootstrapResult {
    std::vector<double> mean;
    std::vector<double> std_error;
    std::size_t resamples = 0;
    std::size_t failures = 0;
};

// Parametric bootstrap: each resample redraws every point's counts as
// Poisson(observed counts), first shifting the mean by the point's Monte Carlo
// rate error scaled to counts when one is recorded, and refits. `fit` maps a ScanResult to a parameter
// vector; FitError from a resample is counted as a failure.
template <class FitOp>
BootstrapResult bootstrap(const ScanResult& scan, FitOp&& fit, std::size_t resamples, RngStream stream,
                          Execution exec = {})
{
    if (resamples < 200)
        throw DomainError("bootstrap: at least 200 resamples required");
    struct Outcome {
        std::vector<double> params;
        bool ok = false;
    };
    const auto outcomes = parallel_map<Outcome>(resamples, exec, [&](std::size_t r) {
        PhiloxEngine engine(stream.split(r));
        ScanResult resampled = scan;
        const double to_counts = scan.meta.rate_scale * scan.meta.dwell;
        for (auto& p : resampled.points) {
            double mean = static_cast<double>(p.counts);
            if (p.std_error > 0.0 && to_counts > 0.0) {
                std::normal_distribution<double> mc(0.0, p.std_error * to_counts);
                mean = std::max(0.0, mean + mc(engine));
            }
            if (mean > 0.0) {
                std::poisson_distribution<std::int64_t> poisson(mean);
                p.counts = poisson(engine);
            }
        }
        Outcome o;
        try {
            o.params = fit(resampled);
            o.ok = true;
        } catch (const FitError&) {
        }
        return o;
    });

    BootstrapResult out;
    out.resamples = resamples;
    std::vector<const std::vector<double>*> good;
    for (const auto& o : outcomes) {
        if (o.ok)
            good.push_back(&o.params);
        else
            ++out.failures;
    }
    if (out.failures * 10 > resamples)
        throw FitError("bootstrap: more than 10% of resample fits failed",
                       std::to_string(out.failures) + " of " + std::to_string(resamples));
    const std::size_t k = good.front()->size();
    out.mean.assign(k, 0.0);
    out.std_error.assign(k, 0.0);
    for (const auto* g : good)
        for (std::size_t j = 0; j < k; ++j)
            out.mean[j] += (*g)[j] / static_cast<double>(good.size());
    for (const auto* g : good)
        for (std::size_t j = 0; j < k; ++j) {
            const double dv = (*g)[j] - out.mean[j];
            out.std_error[j] += dv * dv;
        }
    for (auto& v : out.std_error)
        v = std::sqrt(v / static_cast<double>(good.size() - 1));
    return out;
}

} // namespace twophoton
