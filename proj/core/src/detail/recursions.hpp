#pragma once

#include "pagarch/model.hpp"

#include <span>

namespace pagarch::detail {

// v_t = y_t - x_t'beta - sum_p phi_p y_{t-p}, zero pre-sample y.
inline void ar_transform(const PanelData& panel, int i, const ArmaCoefficients& coef,
                         std::span<double> v) {
    const int T = panel.n_periods();
    const int P = static_cast<int>(coef.phi.size());
    const int D = static_cast<int>(coef.beta.size());
    for (int t = 0; t < T; ++t) {
        double acc = panel.y(i, t);
        for (int d = 0; d < D; ++d) acc -= coef.beta[d] * panel.x[d](i, t);
        for (int p = 1; p <= P && p <= t; ++p) acc -= coef.phi[p - 1] * panel.y(i, t - p);
        v[t] = acc;
    }
}

// Solves B_psi e = v: e_t = v_t - sum_q psi_q e_{t-q}, zero pre-sample e.
inline void ma_inverse(std::span<const double> v, const Vector& psi, std::span<double> e) {
    const int T = static_cast<int>(v.size());
    const int Q = static_cast<int>(psi.size());
    for (int t = 0; t < T; ++t) {
        double acc = v[t];
        for (int q = 1; q <= Q && q <= t; ++q) acc -= psi[q - 1] * e[t - q];
        e[t] = acc;
    }
}

// Solves B_psi' w = r (upper triangular, banded): w_t = r_t - sum_q psi_q w_{t+q}.
inline void ma_inverse_transposed(std::span<const double> r, const Vector& psi,
                                  std::span<double> w) {
    const int T = static_cast<int>(r.size());
    const int Q = static_cast<int>(psi.size());
    for (int t = T - 1; t >= 0; --t) {
        double acc = r[t];
        for (int q = 1; q <= Q && t + q < T; ++q) acc -= psi[q - 1] * w[t + q];
        w[t] = acc;
    }
}

// Variance-targeting GARCH recursion for one unit; u2 holds squared residuals.
inline void garch_recursion(std::span<const double> u2, const GarchCoefficients& coef,
                            double omega, double c_h, std::span<double> h) {
    const int T = static_cast<int>(u2.size());
    const int L = static_cast<int>(coef.tau.size());
    const int K = static_cast<int>(coef.nu.size());
    const double intercept = omega * (1.0 - coef.persistence());
    for (int t = 0; t < T; ++t) {
        double acc = intercept;
        for (int l = 1; l <= L && l <= t; ++l) acc += coef.tau[l - 1] * u2[t - l];
        for (int k = 1; k <= K; ++k) acc += coef.nu[k - 1] * (k <= t ? h[t - k] : c_h);
        h[t] = acc;
    }
}

}  // namespace pagarch::detail
