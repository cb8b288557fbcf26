#pragma once

#include "pagarch/common.hpp"

namespace pagarch {

/// Gamma^{-1} Omega Gamma^{-1} with both pieces normalised by the number of
/// observations NT, so covariance() = sigma / NT is the finite-sample
/// covariance of the estimator.
struct SandwichCovariance {
    Eigen::MatrixXd gamma;
    Eigen::MatrixXd omega;
    Eigen::MatrixXd sigma;
    double n_obs = 0.0;
    double condition_number = 0.0;  // of gamma

    Eigen::MatrixXd covariance() const { return sigma / n_obs; }
    /// Per-parameter asymptotic standard deviations sqrt(diag(sigma) / NT).
    Vector ad() const { return (sigma.diagonal() / n_obs).cwiseMax(0.0).cwiseSqrt(); }
};

inline constexpr double kMaxConditionNumber = 1e10;

/// Symmetrises gamma and the result. Throws NumericalError when gamma is
/// singular or its condition number exceeds kMaxConditionNumber.
SandwichCovariance make_sandwich(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& omega,
                                 double n_obs);

/// Condition number (ratio of extreme singular values); +inf when singular.
double condition_number(const Eigen::MatrixXd& a);

}  // namespace pagarch
