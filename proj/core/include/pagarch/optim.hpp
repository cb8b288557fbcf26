#pragma once

#include "pagarch/common.hpp"

#include <functional>

namespace pagarch {

using Objective = std::function<double(const Vector&)>;
using Gradient = std::function<Vector(const Vector&)>;

struct SimplexOptions {
    int max_iterations = 2000;
    double f_rel_tol = 1e-10;  // relative spread of objective values over the simplex
    double x_tol = 1e-8;       // simplex diameter
    double initial_step = 0.1;
};

struct MinimizeResult {
    Vector x;
    double f = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Nelder-Mead simplex descent. Points where `f` returns +inf or NaN are
/// treated as infeasible, which is how callers impose constraints. A
/// zero-dimensional problem returns f(x0) immediately.
MinimizeResult nelder_mead(const Objective& f, const Vector& x0, const SimplexOptions& options = {});

/// Quasi-Newton (BFGS) with backtracking; `grad` may be a finite-difference
/// gradient. Used as an alternative to the simplex.
MinimizeResult bfgs(const Objective& f, const Gradient& grad, const Vector& x0,
                    int max_iterations = 200, double g_tol = 1e-8);

/// Safeguarded Newton refinement from x0: steps are accepted only when the
/// objective decreases and stays finite. Returns the refined point.
MinimizeResult newton_polish(const Objective& f, const Gradient& grad, const Vector& x0,
                             int max_steps = 6);

/// Central-difference step used throughout: max(1e-5, 1e-5 |x_k|).
double fd_step(double x);

Vector central_gradient(const Objective& f, const Vector& x);

/// Jacobian of a vector map by central differences (rows = outputs).
Eigen::MatrixXd central_jacobian(const std::function<Vector(const Vector&)>& g, const Vector& x);

/// Symmetrized central-difference Jacobian of an analytic gradient.
Eigen::MatrixXd hessian_from_gradient(const Gradient& grad, const Vector& x);

}  // namespace pagarch
