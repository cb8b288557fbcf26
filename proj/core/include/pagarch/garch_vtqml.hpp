#pragma once

// Step two: variance-targeting quasi-maximum likelihood for zeta = (tau, nu)
// on first-step residuals. omega_i is the sample second moment of unit i's
// residuals; only zeta is searched numerically.

#include "pagarch/model.hpp"
#include "pagarch/optim.hpp"

#include <optional>

namespace pagarch {

struct GarchEstimate {
    int L = 0;
    int K = 0;
    Vector zeta;       // (tau, nu)
    Vector omega;      // omega_hat_i
    Vector varpi;      // omega_hat_i (1 - sum tau - sum nu)
    Matrix h;          // garch_filter(residuals, zeta, omega, c_h)
    Vector c_h;        // pre-sample variance actually used, per unit
    double loglik = 0.0;
    bool converged = false;
    bool boundary = false;  // a constraint is active within 1e-5
    Eigen::MatrixXd covariance_zeta;  // one-step sandwich / (NT); empty when not computed

    GarchCoefficients coefficients() const { return GarchCoefficients::unpack(zeta, L, K); }
    GarchParams params() const { return {omega, coefficients()}; }
};

struct GarchFitOptions {
    SimplexOptions simplex;
    double margin = 1e-6;              // sum tau + sum nu <= 1 - margin
    std::optional<double> c_h;         // scalar pre-sample variance; default omega_hat_i
    bool polish = true;
    std::optional<Vector> warm_start;  // tried in addition to the default starts
    bool compute_covariance = true;
};

inline constexpr double kBoundaryTolerance = 1e-5;

/// omega_hat_i = T^{-1} sum_t u_it^2. Throws ValidationError naming the unit
/// when its residuals are identically zero.
Vector variance_target(const Matrix& residuals);

/// True when tau, nu >= 0 and sum tau + sum nu <= 1 - margin.
bool garch_feasible(const Vector& zeta, int L, int K, double margin = 1e-6);

/// L = -1/2 sum_i sum_t [log h_it + u_it^2 / h_it], h from garch_filter.
/// Throws ValidationError for infeasible zeta.
double vt_quasi_loglik(const Vector& zeta, int L, int K, const Vector& omega,
                       const Matrix& residuals, const Vector& c_h);
double vt_quasi_loglik(const Vector& zeta, int L, int K, const Vector& omega,
                       const Matrix& residuals, double c_h);

/// Unit contributions to dL/dzeta at fixed omega and c_h (N x (L+K)), via the
/// derivative recursions of h.
Eigen::MatrixXd garch_unit_scores(const Vector& zeta, int L, int K, const Vector& omega,
                                  const Matrix& residuals, const Vector& c_h);

/// Resolves the pre-sample variance: options.c_h if set, otherwise omega.
Vector resolve_c_h(const GarchFitOptions& options, const Vector& omega);

/// Fills omega, varpi, h, loglik at a given zeta (no search).
GarchEstimate evaluate_garch(const Matrix& residuals, int L, int K, const Vector& zeta,
                             const GarchFitOptions& options = {});

/// VT-QML estimator. Throws NumericalError when no start yields a finite
/// likelihood.
GarchEstimate fit_garch(const Matrix& residuals, int L, int K, const GarchFitOptions& options = {});

}  // namespace pagarch
