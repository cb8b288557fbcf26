#pragma once

// Panel ARMA(P,Q)-GARCH(L,K) data model with unit fixed effects:
//
//   y_it = mu_i + x_it' beta + sum_p phi_p y_{i,t-p} + sum_q psi_q u_{i,t-q} + u_it
//   u_it = sqrt(h_it) eps_it
//   h_it = omega_i (1 - sum tau - sum nu) + sum_l tau_l u_{i,t-l}^2 + sum_k nu_k h_{i,t-k}
//
// The variance equation is written in its variance-targeting form, so the
// variance fixed effect is the unconditional variance omega_i and the GARCH
// intercept varpi_i = omega_i (1 - sum tau - sum nu) is derived.

#include "pagarch/common.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pagarch {

struct ModelOrders {
    int P = 0;   // AR
    int Q = 0;   // MA
    int L = 0;   // ARCH
    int K = 0;   // GARCH
    int Dx = 0;  // exogenous regressors

    int n_lambda() const { return Dx + P + Q; }
    int n_zeta() const { return L + K; }
    int max_lag() const;
    /// Throws ValidationError on negative orders or K >= 1 with L == 0.
    void validate() const;

    friend bool operator==(const ModelOrders&, const ModelOrders&) = default;
};

/// Balanced N x T panel. `x[d]` is the N x T matrix of regressor d.
struct PanelData {
    Matrix y;
    std::vector<Matrix> x;
    std::vector<std::string> unit_ids;  // optional; empty means "0".."N-1"

    int n_units() const { return static_cast<int>(y.rows()); }
    int n_periods() const { return static_cast<int>(y.cols()); }
    int n_regressors() const { return static_cast<int>(x.size()); }

    /// Finite cells, consistent regressor shapes, N >= 1, T >= 1.
    void validate() const;
    /// Additionally checks D_x and T >= max_lag + 2 for the given orders.
    void validate_for(const ModelOrders& orders) const;

    /// Periods [begin, end) as a fresh panel (zero pre-sample values apply
    /// to the slice when it is filtered).
    PanelData slice_periods(int begin, int end) const;
    /// A single-unit panel.
    PanelData unit(int i) const;
    std::string unit_label(int i) const;
};

/// lambda = (beta, phi, psi), packed in that order.
struct ArmaCoefficients {
    Vector beta;
    Vector phi;
    Vector psi;

    Vector pack() const;
    static ArmaCoefficients unpack(const Vector& lambda, const ModelOrders& orders);
};

/// zeta = (tau, nu), packed in that order.
struct GarchCoefficients {
    Vector tau;
    Vector nu;

    double persistence() const { return tau.sum() + nu.sum(); }
    Vector pack() const;
    static GarchCoefficients unpack(const Vector& zeta, int L, int K);
};

struct ArmaParams {
    Vector mu;  // length N
    ArmaCoefficients coef;
};

struct GarchParams {
    Vector omega;  // length N, unconditional variances
    GarchCoefficients coef;

    /// varpi_i = omega_i (1 - sum tau - sum nu)
    Vector varpi() const;
    /// Throws ValidationError when tau/nu are negative, persistence exceeds
    /// 1 - margin, or some omega_i <= 0.
    void validate(double margin = 1e-6) const;
};

struct ArmaValidity {
    bool valid = true;
    std::string reason;
    std::vector<std::complex<double>> offending_roots;  // in the z-plane
};

inline constexpr double kRootMargin = 1e-8;
inline constexpr double kCommonRootTol = 1e-6;

/// Roots of 1 - sum phi_p z^p must satisfy |z| > 1 + 1e-8, likewise roots of
/// 1 + sum psi_q z^q, and the two polynomials may not share a root (relative
/// distance 1e-6).
ArmaValidity validate_arma(const Vector& phi, const Vector& psi);

/// Roots of the polynomial 1 + sum_k c_k z^k (k = 1..n), via the eigenvalues of
/// the companion matrix. Zero reciprocal roots (roots at infinity) are dropped.
std::vector<std::complex<double>> lag_polynomial_roots(const Vector& coefficients);

/// Feasible ARMA residuals with zero pre-sample y and u:
///   u_it = y_it - mu_i - x_it'beta - sum phi_p y_{i,t-p} - sum psi_q u_{i,t-q}.
Matrix residual_filter(const PanelData& panel, const ArmaParams& params);

/// Variance-targeting GARCH recursion with zero pre-sample u and h_{i,s} = c_h[i]
/// for s <= 0.
Matrix garch_filter(const Matrix& u, const GarchCoefficients& coef, const Vector& omega,
                    const Vector& c_h);
Matrix garch_filter(const Matrix& u, const GarchCoefficients& coef, const Vector& omega,
                    double c_h);

struct Innovation {
    enum class Kind { Normal, StudentT };
    Kind kind = Kind::Normal;
    double df = 0.0;  // Student-t degrees of freedom, must exceed 4

    static Innovation normal() { return {}; }
    static Innovation student_t(double df) { return {Kind::StudentT, df}; }
    void validate() const;
};

struct SimulationSpec {
    ModelOrders orders;
    ArmaParams arma;
    GarchParams garch;
    Innovation innovation;
    int n_periods = 0;
    int burn_in = 500;
};

/// Simulated panel together with the latent series that generated it.
struct SimulationResult {
    PanelData panel;
    Matrix u;
    Matrix h;
    Matrix eps;
};

/// Regressors are i.i.d. N(0,1). h starts at omega_i, y and u at zero, and the
/// first `burn_in` periods are discarded. Each unit draws from its own
/// substream derived from (seed, unit), so output is independent of the order
/// in which units are generated.
SimulationResult simulate_detailed(const SimulationSpec& spec, std::uint64_t seed);
PanelData simulate(const SimulationSpec& spec, std::uint64_t seed);

/// Draws mean-0, variance-1 innovations; keeps distribution state between draws.
class InnovationSampler {
public:
    explicit InnovationSampler(const Innovation& spec)
        : spec_(spec),
          t_(spec.kind == Innovation::Kind::StudentT ? spec.df : 5.0),
          t_scale_(spec.kind == Innovation::Kind::StudentT ? std::sqrt((spec.df - 2.0) / spec.df)
                                                           : 1.0) {}

    template <class Gen>
    double operator()(Gen& gen) {
        if (spec_.kind == Innovation::Kind::StudentT) return t_(gen) * t_scale_;
        return normal_(gen);
    }

private:
    Innovation spec_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::student_t_distribution<double> t_;
    double t_scale_;
};

}  // namespace pagarch
