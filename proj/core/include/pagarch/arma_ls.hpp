#pragma once

// Step one: least squares for the panel ARMA mean equation with the unit
// fixed effects mu_i concentrated out in closed form.

#include "pagarch/model.hpp"
#include "pagarch/optim.hpp"

#include <optional>

namespace pagarch {

/// Per-unit weights of the mu concentration for a given psi and T:
/// w = B_psi^{-1} l_T, sigma_psi_inv_l = Sigma_psi^{-1} l_T = B_psi'^{-1} w and
/// denom = l_T' Sigma_psi^{-1} l_T = w'w. Built with two banded triangular
/// solves; Sigma_psi is never formed.
struct ConcentrationKernel {
    Vector w;
    Vector sigma_psi_inv_l;
    double denom = 0.0;

    static ConcentrationKernel make(const Vector& psi, int T);
};

struct ArmaEstimate {
    ModelOrders orders;
    Vector lambda;        // (beta, phi, psi)
    Vector mu;            // concentrated fixed effects at lambda
    Matrix residuals;     // residual_filter(panel, (mu, lambda))
    double objective = 0.0;
    bool converged = false;
    int iterations = 0;
    Eigen::MatrixXd covariance_lambda;  // Sigma_1 / (NT); empty when not computed

    ArmaCoefficients coefficients() const { return ArmaCoefficients::unpack(lambda, orders); }
    ArmaParams params() const { return {mu, coefficients()}; }
};

enum class ArmaOptimizer { Simplex, QuasiNewton };

struct ArmaFitOptions {
    ArmaOptimizer optimizer = ArmaOptimizer::Simplex;
    SimplexOptions simplex;
    bool polish = true;                 // Newton refinement after the search
    std::optional<Vector> warm_start;   // replaces the default multi-start
    bool compute_covariance = true;
};

/// mu_hat_i(lambda) = (l' Sigma^{-1} l)^{-1} l' Sigma^{-1} (A_phi y_i - x_i beta).
/// Throws ValidationError for a lambda outside the invertible/stationary region.
Vector concentrate_mu(const ModelOrders& orders, const Vector& lambda, const PanelData& panel);

/// Concentrated least-squares objective: sum of squared feasible residuals
/// at (mu_hat(lambda), lambda). Throws ValidationError for an invalid lambda.
double concentrated_objective(const ModelOrders& orders, const Vector& lambda,
                              const PanelData& panel);

/// Same, but +inf outside the parameter space (for the optimizer).
double concentrated_objective_or_inf(const ModelOrders& orders, const Vector& lambda,
                                     const PanelData& panel);

/// Unit contributions to the gradient of the concentrated objective
/// (N x dim(lambda)), evaluated analytically with derivative recursions.
/// Rows sum to the full gradient.
Eigen::MatrixXd arma_unit_scores(const ModelOrders& orders, const Vector& lambda,
                                 const PanelData& panel);

Vector arma_gradient(const ModelOrders& orders, const Vector& lambda, const PanelData& panel);

/// Central-difference Hessian of the concentrated objective (differences of
/// the analytic gradient, symmetrized).
Eigen::MatrixXd arma_hessian(const ModelOrders& orders, const Vector& lambda,
                             const PanelData& panel);

/// Gradient of the concentrated objective when only periods [skip, T) enter the
/// sum of squares while the recursions run over the whole panel. With a long
/// simulated pre-sample in [0, skip) this is the score under the true initial
/// values; with skip = 0 it is the feasible score.
Vector arma_gradient_windowed(const ModelOrders& orders, const Vector& lambda,
                              const PanelData& panel, int skip);

/// Pooled OLS of unit-demeaned y on demeaned regressors and AR lags (zero
/// pre-sample y). Returns (beta, phi); the starting point of the search.
Vector within_ols_start(const PanelData& panel, const ModelOrders& orders);

/// Packs mu_hat, residuals, and objective at a given lambda.
ArmaEstimate evaluate_arma(const PanelData& panel, const ModelOrders& orders, const Vector& lambda);

/// Least-squares estimator of lambda over the invertible/stationary region.
/// Throws NumericalError if no start reaches a valid point.
ArmaEstimate fit_arma(const PanelData& panel, const ModelOrders& orders,
                      const ArmaFitOptions& options = {});

}  // namespace pagarch
