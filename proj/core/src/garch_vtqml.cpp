#include "pagarch/garch_vtqml.hpp"

#include "detail/recursions.hpp"
#include "pagarch/sandwich.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace pagarch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_shapes(const Vector& zeta, int L, int K, const Vector& omega, const Matrix& u,
                  const Vector& c_h) {
    if (L < 0 || K < 0 || (K >= 1 && L == 0)) throw ValidationError("invalid GARCH orders");
    if (zeta.size() != L + K) throw ValidationError("zeta has the wrong length");
    if (omega.size() != u.rows() || c_h.size() != u.rows()) {
        throw ValidationError("omega / c_h length does not match the number of units");
    }
    for (Eigen::Index i = 0; i < omega.size(); ++i) {
        if (!(omega[i] > 0.0)) throw ValidationError("omega must be positive");
        if (!(c_h[i] > 0.0)) throw ValidationError("c_h must be positive");
    }
}

// Log-likelihood of one unit; optionally accumulates its zeta score.
double unit_loglik(const double* u, int T, const GarchCoefficients& coef, double omega, double c_h,
                   std::vector<double>& u2, std::vector<double>& h, double* score,
                   std::vector<double>& dh) {
    for (int t = 0; t < T; ++t) u2[t] = u[t] * u[t];
    detail::garch_recursion(u2, coef, omega, c_h, h);
    double ll = 0.0;
    for (int t = 0; t < T; ++t) {
        if (!(h[t] > 0.0)) {
            if (score != nullptr) {
                for (Eigen::Index j = 0; j < coef.tau.size() + coef.nu.size(); ++j) {
                    score[j] = std::numeric_limits<double>::quiet_NaN();
                }
            }
            return -kInf;
        }
        ll += std::log(h[t]) + u2[t] / h[t];
    }
    ll *= -0.5;
    if (score == nullptr) return ll;

    const int L = static_cast<int>(coef.tau.size());
    const int K = static_cast<int>(coef.nu.size());
    // dh[t] for one parameter at a time: dh_t = -omega + s_t + sum nu_k dh_{t-k}.
    for (int j = 0; j < L + K; ++j) {
        double acc = 0.0;
        for (int t = 0; t < T; ++t) {
            double d = -omega;
            if (j < L) {
                const int l = j + 1;
                if (t - l >= 0) d += u2[t - l];
            } else {
                const int k = j - L + 1;
                d += t - k >= 0 ? h[t - k] : c_h;
            }
            for (int k = 1; k <= K && k <= t; ++k) d += coef.nu[k - 1] * dh[t - k];
            dh[t] = d;
            acc += 0.5 * (u2[t] / h[t] - 1.0) / h[t] * d;
        }
        score[j] = acc;
    }
    return ll;
}

}  // namespace

Vector variance_target(const Matrix& residuals) {
    if (residuals.cols() < 1) throw ValidationError("variance_target needs T >= 1");
    Vector omega(residuals.rows());
    for (Eigen::Index i = 0; i < residuals.rows(); ++i) {
        omega[i] = residuals.row(i).squaredNorm() / static_cast<double>(residuals.cols());
        if (!(omega[i] > 0.0)) {
            throw ValidationError("unit " + std::to_string(i) +
                                  " has identically zero residuals; omega_hat is not positive");
        }
    }
    return omega;
}

bool garch_feasible(const Vector& zeta, int L, int K, double margin) {
    if (zeta.size() != L + K || !zeta.allFinite()) return false;
    if ((zeta.array() < 0.0).any()) return false;
    return zeta.sum() <= 1.0 - margin;
}

double vt_quasi_loglik(const Vector& zeta, int L, int K, const Vector& omega,
                       const Matrix& residuals, const Vector& c_h) {
    check_shapes(zeta, L, K, omega, residuals, c_h);
    if (!garch_feasible(zeta, L, K)) throw ValidationError("zeta outside the constraint set");
    const auto coef = GarchCoefficients::unpack(zeta, L, K);
    const int T = static_cast<int>(residuals.cols());
    std::vector<double> u2(T), h(T), dh(T);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < residuals.rows(); ++i) {
        ll += unit_loglik(residuals.row(i).data(), T, coef, omega[i], c_h[i], u2, h, nullptr, dh);
    }
    return ll;
}

double vt_quasi_loglik(const Vector& zeta, int L, int K, const Vector& omega,
                       const Matrix& residuals, double c_h) {
    return vt_quasi_loglik(zeta, L, K, omega, residuals,
                           Vector(Vector::Constant(residuals.rows(), c_h)));
}

Eigen::MatrixXd garch_unit_scores(const Vector& zeta, int L, int K, const Vector& omega,
                                  const Matrix& residuals, const Vector& c_h) {
    check_shapes(zeta, L, K, omega, residuals, c_h);
    const auto coef = GarchCoefficients::unpack(zeta, L, K);
    const int T = static_cast<int>(residuals.cols());
    std::vector<double> u2(T), h(T), dh(T);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> s(residuals.rows(), L + K);
    for (Eigen::Index i = 0; i < residuals.rows(); ++i) {
        unit_loglik(residuals.row(i).data(), T, coef, omega[i], c_h[i], u2, h, s.row(i).data(), dh);
    }
    return s;
}

Vector resolve_c_h(const GarchFitOptions& options, const Vector& omega) {
    if (options.c_h) {
        if (!(*options.c_h > 0.0)) throw ValidationError("c_h must be positive");
        return Vector::Constant(omega.size(), *options.c_h);
    }
    return omega;
}

GarchEstimate evaluate_garch(const Matrix& residuals, int L, int K, const Vector& zeta,
                             const GarchFitOptions& options) {
    GarchEstimate est;
    est.L = L;
    est.K = K;
    est.zeta = zeta;
    est.omega = variance_target(residuals);
    est.c_h = resolve_c_h(options, est.omega);
    est.loglik = vt_quasi_loglik(zeta, L, K, est.omega, residuals, est.c_h);
    const auto coef = GarchCoefficients::unpack(zeta, L, K);
    est.varpi = est.omega * (1.0 - coef.persistence());
    est.h = garch_filter(residuals, coef, est.omega, est.c_h);
    const double tol = kBoundaryTolerance;
    est.boundary = (zeta.array() < tol).any() || zeta.sum() > 1.0 - options.margin - tol;
    return est;
}

GarchEstimate fit_garch(const Matrix& residuals, int L, int K, const GarchFitOptions& options) {
    if (L < 0 || K < 0 || (K >= 1 && L == 0)) throw ValidationError("invalid GARCH orders");
    if (!residuals.allFinite()) throw ValidationError("residuals contain non-finite values");
    const Vector omega = variance_target(residuals);
    const Vector c_h = resolve_c_h(options, omega);
    const int dim = L + K;
    const double nt = static_cast<double>(residuals.rows()) * static_cast<double>(residuals.cols());

    // Minimise -L / (NT) so tolerances do not scale with the panel size.
    const Objective f = [&](const Vector& z) {
        if (!garch_feasible(z, L, K, options.margin)) return kInf;
        const double ll = vt_quasi_loglik(z, L, K, omega, residuals, c_h);
        return std::isfinite(ll) ? -ll / nt : kInf;
    };
    // The gradient is also evaluated slightly outside the constraint set by
    // finite-difference Hessians near the boundary; the recursion is still
    // well defined there.
    const Gradient grad = [&](const Vector& z) {
        return Vector(-garch_unit_scores(z, L, K, omega, residuals, c_h).colwise().sum().transpose() / nt);
    };

    std::vector<Vector> starts;
    if (options.warm_start) {
        if (options.warm_start->size() != dim) throw ValidationError("warm start has the wrong length");
        starts.push_back(*options.warm_start);
    }
    for (auto [a, b] : {std::pair{0.05, 0.85}, {0.10, 0.60}, {0.30, 0.30}}) {
        Vector z(dim);
        for (int l = 0; l < L; ++l) z[l] = a / L;
        for (int k = 0; k < K; ++k) z[L + k] = b / K;
        starts.push_back(z);
    }

    bool have = false;
    MinimizeResult best;
    for (const Vector& z0 : starts) {
        if (!std::isfinite(f(z0))) continue;
        SimplexOptions so = options.simplex;
        so.initial_step = std::min(so.initial_step, 0.05);
        MinimizeResult r = nelder_mead(f, z0, so);
        if (options.polish && std::isfinite(r.f) && dim > 0) {
            const MinimizeResult p = newton_polish(f, grad, r.x);
            if (p.f <= r.f) {
                r.x = p.x;
                r.f = p.f;
            }
        }
        if (!std::isfinite(r.f)) continue;
        if (!have || r.f < best.f) {
            best = r;
            have = true;
        }
    }
    if (!have) throw NumericalError("fit_garch: no start produced a finite likelihood");

    GarchEstimate est = evaluate_garch(residuals, L, K, best.x, options);
    est.converged = best.converged;
    if (dim > 0 && !est.converged) {
        const Vector g = grad(best.x);
        est.converged = g.allFinite() && g.lpNorm<Eigen::Infinity>() < 1e-6;
    }
    if (options.compute_covariance && dim > 0) {
        try {
            const Eigen::MatrixXd S = garch_unit_scores(best.x, L, K, omega, residuals, c_h);
            const Eigen::MatrixXd H = hessian_from_gradient(grad, best.x);  // of -L/(NT)
            const auto sw = make_sandwich(H, S.transpose() * S / nt, nt);
            est.covariance_zeta = sw.covariance();
        } catch (const NumericalError&) {
            est.covariance_zeta.resize(0, 0);
        }
    }
    return est;
}

}  // namespace pagarch
