#pragma once

// Bias corrections for the two-step estimator and its standard errors.

#include "pagarch/arma_ls.hpp"
#include "pagarch/garch_vtqml.hpp"
#include "pagarch/sandwich.hpp"

#include <array>
#include <cstdint>

namespace pagarch {

enum class CorrectionMethod { Analytic, Jackknife };

/// 2 full - (half1 + half2) / 2, elementwise.
Vector jackknife_combine(const Vector& full, const Vector& half1, const Vector& half2);

/// Period ranges of the two half panels: [0, floor(T/2)) and [floor(T/2), T).
std::array<std::pair<int, int>, 2> half_ranges(int T);

struct ArmaCorrection {
    CorrectionMethod method = CorrectionMethod::Jackknife;
    Vector lambda_hat;        // uncorrected
    Vector lambda_corrected;
    ArmaEstimate estimate;    // evaluated at lambda_corrected, mu re-concentrated

    // Jackknife path.
    std::array<Vector, 2> halves;
    std::array<ArmaEstimate, 2> half_fits;

    // Analytic path: lambda_corrected = lambda_hat - (c1_hat + c1_dag_hat) / T.
    Vector c1_hat;      // fixed-effect component
    Vector c1_dag_hat;  // initial-value component
    Vector bias;        // (c1_hat + c1_dag_hat) / T
    Vector bias_se;     // bootstrap standard error of `bias`
    int bootstrap_reps = 0;
    double gamma_condition = 0.0;
};

struct CorrectionOptions {
    ArmaFitOptions arma;
    GarchFitOptions garch;
    int bootstrap_reps = 200;
    int bootstrap_burn_in = 200;
    std::uint64_t seed = 0;
    int workers = 1;
    CorrectionMethod zeta_star_lambda = CorrectionMethod::Jackknife;
    // zeta_star halves: false reuses the full-panel lambda_star residuals on
    // each half; true repeats the lambda correction inside each half.
    bool refit_half_lambda = false;
};

/// Half-panel jackknife for lambda. `fit` is the full-sample estimate (used
/// as the warm start of both halves); pass nullptr to fit it here.
ArmaCorrection jackknife_arma(const PanelData& panel, const ModelOrders& orders,
                              const CorrectionOptions& options = {},
                              const ArmaEstimate* fit = nullptr);

/// Parametric-bootstrap analytic correction. Bootstrap panels are simulated
/// from (mu_hat, lambda_hat) with i.i.d. N(0, omega_hat_i) errors; regressors
/// are the observed ones, with burn-in rows resampled from each unit's own
/// observations. The feasible score at lambda_hat averaged over bootstrap
/// panels estimates E(D) + E(D_dag); the score of the same panels with the
/// burn-in kept as true pre-sample values estimates E(D) alone.
ArmaCorrection analytic_correct_arma(const PanelData& panel, const ArmaEstimate& fit,
                                     const CorrectionOptions& options = {});

struct GarchCorrection {
    CorrectionMethod lambda_method = CorrectionMethod::Jackknife;
    Vector lambda_star;                // corrected lambda behind zeta_star
    ArmaCorrection lambda_correction;  // the correction that produced lambda_star
    Vector zeta_star;                  // VT-QML on residuals at lambda_star
    std::array<Vector, 2> halves;      // zeta_star on each half
    Vector zeta_corrected;             // 2 zeta_star - (half1 + half2) / 2
    GarchEstimate estimate;            // at zeta_corrected, omega and h from lambda_star residuals
};

/// zeta_J with zeta_star computed from lambda_A or lambda_J residuals. By
/// default each half re-estimates zeta on its own periods of those residuals;
/// with refit_half_lambda it repeats both steps, including the lambda
/// correction, on its own subsample. `arma_fit` (full-sample fit) may be nullptr.
GarchCorrection jackknife_garch(const PanelData& panel, const ModelOrders& orders,
                                const CorrectionOptions& options = {},
                                const ArmaEstimate* arma_fit = nullptr);

/// Gamma_1 = Hessian of the concentrated objective / NT, Omega_1 = unit-clustered
/// outer product of objective-gradient contributions / NT.
SandwichCovariance covariance_lambda(const PanelData& panel, const ArmaEstimate& fit);

/// Two-step sandwich for zeta. The unit score of the likelihood is corrected
/// for the first-step estimation effect through the numerical Jacobian of the
/// summed likelihood score in lambda (mu and omega re-concentrated). With
/// lambda_known the correction is dropped and the one-step VT-QML sandwich
/// results.
SandwichCovariance covariance_zeta(const PanelData& panel, const ArmaEstimate& arma_fit,
                                   const GarchEstimate& garch_fit, bool lambda_known = false);

struct Interval {
    double estimate = 0.0;
    double se = 0.0;
    double lower = 0.0;
    double upper = 0.0;

    bool covers(double v) const { return lower <= v && v <= upper; }
};

struct FixedEffectInference {
    int unit = 0;
    Interval mu;
    Interval omega;
    Interval varpi;
    double sigma2_1 = 0.0;      // omega_hat_i T / (l' Sigma_psi^{-1} l)
    double sigma2_2 = 0.0;      // variance of sqrt(T)(omega_hat_i - omega_i)
    double sigma2_2_bar = 0.0;  // variance of sqrt(T)(varpi_hat_i - varpi_i)
    double kurtosis = 0.0;      // pooled sample E(eps^4) of standardized residuals
};

/// Normal intervals for mu_i, omega_i and varpi_i at the given level. E(eps^4)
/// is the panel-pooled fourth moment of u_hat / sqrt(h_hat), E(h^2) the mean of
/// h_hat_i^2. Throws NumericalError if the fourth moment is <= 1.
FixedEffectInference fixed_effect_inference(const ArmaEstimate& arma_fit,
                                            const GarchEstimate& garch_fit, int unit,
                                            double level = 0.95);

/// Standard normal quantile.
double normal_quantile(double p);

}  // namespace pagarch
