#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) for small weighted least-squares
// problems with analytic Jacobians.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace twophoton {

struct LmOptions {
    int max_iterations = 200;
    double relative_tolerance = 1e-10;
};

struct LmResult {
    Eigen::VectorXd params;
    double objective = 0.0;                 // sum of squared residuals
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_history;  // accepted iterations only
    Eigen::MatrixXd normal_matrix;          // J^T J at the solution
    std::string message;
};

// `residuals(p, r, J)` fills the weighted residual vector and its Jacobian.
template <class Residuals>
LmResult levenberg_marquardt(Residuals&& residuals, Eigen::VectorXd p, const LmOptions& options = {})
{
    LmResult out;
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    residuals(p, r, J);
    double objective = r.squaredNorm();
    if (!std::isfinite(objective)) {
        out.params = p;
        out.objective = objective;
        out.message = "non-finite objective at the initial point";
        return out;
    }
    out.objective_history.push_back(objective);

    double lambda = 1e-3;
    Eigen::VectorXd r_new;
    Eigen::MatrixXd J_new;
    int it = 0;
    for (; it < options.max_iterations && !out.converged; ++it) {
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        if (objective == 0.0 || g.lpNorm<Eigen::Infinity>() <= 1e-300) {
            out.converged = true;
            out.message = "zero gradient";
            break;
        }
        const double diag_floor = 1e-12 * std::max(A.diagonal().maxCoeff(), 1e-300);
        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd M = A;
            for (Eigen::Index i = 0; i < M.rows(); ++i)
                M(i, i) += lambda * std::max(A(i, i), diag_floor);
            const Eigen::VectorXd step = M.ldlt().solve(-g);
            const Eigen::VectorXd trial = p + step;
            residuals(trial, r_new, J_new);
            const double trial_objective = r_new.squaredNorm();
            if (step.allFinite() && std::isfinite(trial_objective) && trial_objective < objective) {
                const double rel = (objective - trial_objective) / std::max(objective, 1e-300);
                p = trial;
                r.swap(r_new);
                J.swap(J_new);
                objective = trial_objective;
                out.objective_history.push_back(objective);
                lambda = std::max(lambda * 0.1, 1e-15);
                accepted = true;
                if (rel < options.relative_tolerance) {
                    out.converged = true;
                    out.message = "relative objective change below tolerance";
                }
            } else {
                lambda *= 10.0;
                if (lambda > 1e16) {
                    // No descent direction left at machine precision.
                    out.converged = true;
                    out.message = "stationary point";
                    break;
                }
            }
        }
    }
    if (!out.converged)
        out.message = "iteration limit reached";
    out.params = p;
    out.objective = objective;
    out.iterations = it;
    out.normal_matrix = J.transpose() * J;
    return out;
}

} // namespace twophoton
