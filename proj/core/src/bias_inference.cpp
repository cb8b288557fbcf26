#include "pagarch/bias_inference.hpp"

#include "pagarch/parallel.hpp"
#include "pagarch/rng.hpp"

#include <cmath>
#include <random>

namespace pagarch {

Vector jackknife_combine(const Vector& full, const Vector& half1, const Vector& half2) {
    if (half1.size() != full.size() || half2.size() != full.size()) {
        throw ValidationError("jackknife_combine: length mismatch");
    }
    return 2.0 * full - 0.5 * (half1 + half2);
}

std::array<std::pair<int, int>, 2> half_ranges(int T) {
    const int m = T / 2;
    return {{{0, m}, {m, T}}};
}

namespace {

ArmaFitOptions warm(const ArmaFitOptions& base, const Vector& start) {
    ArmaFitOptions o = base;
    o.warm_start = start;
    o.compute_covariance = false;
    return o;
}

ArmaEstimate evaluate_or_throw(const PanelData& panel, const ModelOrders& orders, const Vector& lambda) {
    const auto c = ArmaCoefficients::unpack(lambda, orders);
    const auto v = validate_arma(c.phi, c.psi);
    if (!v.valid) throw NumericalError("bias-corrected lambda is outside the parameter space: " + v.reason);
    return evaluate_arma(panel, orders, lambda);
}

}  // namespace

ArmaCorrection jackknife_arma(const PanelData& panel, const ModelOrders& orders,
                              const CorrectionOptions& options, const ArmaEstimate* fit) {
    const int T = panel.n_periods();
    if (T < 2 * (orders.P + orders.Q + 5)) {
        throw ValidationError("jackknife_arma needs T >= 2 (P + Q + 5)");
    }
    ArmaFitOptions full_options = options.arma;
    full_options.compute_covariance = false;
    const ArmaEstimate full = fit ? *fit : fit_arma(panel, orders, full_options);

    ArmaCorrection out;
    out.method = CorrectionMethod::Jackknife;
    out.lambda_hat = full.lambda;
    const auto ranges = half_ranges(T);
    for (int k = 0; k < 2; ++k) {
        const PanelData half = panel.slice_periods(ranges[k].first, ranges[k].second);
        out.half_fits[k] = fit_arma(half, orders, warm(options.arma, full.lambda));
        out.halves[k] = out.half_fits[k].lambda;
    }
    out.lambda_corrected = jackknife_combine(full.lambda, out.halves[0], out.halves[1]);
    out.estimate = evaluate_or_throw(panel, orders, out.lambda_corrected);
    return out;
}

ArmaCorrection analytic_correct_arma(const PanelData& panel, const ArmaEstimate& fit,
                                     const CorrectionOptions& options) {
    const ModelOrders& orders = fit.orders;
    const int N = panel.n_units(), T = panel.n_periods();
    const int B = options.bootstrap_burn_in;
    const int R = options.bootstrap_reps;
    const int dim = orders.n_lambda();
    if (R < 2) throw ValidationError("analytic correction needs at least 2 bootstrap panels");
    if (B < 0) throw ValidationError("bootstrap burn-in must be non-negative");

    ArmaCorrection out;
    out.method = CorrectionMethod::Analytic;
    out.lambda_hat = fit.lambda;
    out.bootstrap_reps = R;

    const Eigen::MatrixXd H = arma_hessian(orders, fit.lambda, panel);
    out.gamma_condition = condition_number(H);
    if (!(out.gamma_condition <= kMaxConditionNumber)) {
        throw NumericalError("analytic correction: Gamma_1 is singular");
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> H_lu(H);

    const auto coef = fit.coefficients();
    Vector omega(N);
    for (int i = 0; i < N; ++i) omega[i] = fit.residuals.row(i).squaredNorm() / T;

    // Feasible and infeasible scores per bootstrap panel.
    Eigen::MatrixXd feasible(dim, R), infeasible(dim, R);
    parallel_for(static_cast<std::size_t>(R), options.workers, [&](std::size_t b) {
        const int TL = B + T;
        PanelData longp;
        longp.y.resize(N, TL);
        longp.x.assign(orders.Dx, Matrix(N, TL));
        std::vector<double> u(TL);
        for (int i = 0; i < N; ++i) {
            Rng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(i)}));
            std::uniform_int_distribution<int> pick(0, T - 1);
            std::normal_distribution<double> normal(0.0, std::sqrt(omega[i]));
            for (int t = 0; t < TL; ++t) {
                const int src = t < B ? pick(rng) : t - B;
                for (int d = 0; d < orders.Dx; ++d) longp.x[d](i, t) = panel.x[d](i, src);
            }
            for (int t = 0; t < TL; ++t) {
                u[t] = normal(rng);
                double y = fit.mu[i] + u[t];
                for (int d = 0; d < orders.Dx; ++d) y += coef.beta[d] * longp.x[d](i, t);
                for (int p = 1; p <= orders.P && p <= t; ++p) y += coef.phi[p - 1] * longp.y(i, t - p);
                for (int q = 1; q <= orders.Q && q <= t; ++q) y += coef.psi[q - 1] * u[t - q];
                longp.y(i, t) = y;
            }
        }
        const PanelData sample = longp.slice_periods(B, B + T);
        feasible.col(static_cast<Eigen::Index>(b)) = arma_gradient(orders, fit.lambda, sample);
        infeasible.col(static_cast<Eigen::Index>(b)) =
            arma_gradient_windowed(orders, fit.lambda, longp, B);
    });

    // lambda_hat - lambda ~ -H^{-1} score, so the bias is -H^{-1} E(score).
    const Eigen::MatrixXd per_rep = -H_lu.solve(feasible);
    const Vector mean_feasible = feasible.rowwise().mean();
    const Vector mean_infeasible = infeasible.rowwise().mean();
    out.bias = per_rep.rowwise().mean();
    const Eigen::MatrixXd centered = per_rep.colwise() - out.bias;
    out.bias_se = (centered.rowwise().squaredNorm() / (R - 1.0)).cwiseSqrt() / std::sqrt(static_cast<double>(R));
    out.c1_hat = -T * H_lu.solve(mean_infeasible);
    out.c1_dag_hat = -T * H_lu.solve(Vector(mean_feasible - mean_infeasible));
    out.lambda_corrected = fit.lambda - out.bias;
    out.estimate = evaluate_or_throw(panel, orders, out.lambda_corrected);
    return out;
}

namespace {

struct StarResult {
    Vector lambda_star;
    GarchEstimate garch;
    ArmaCorrection correction;
};

StarResult zeta_star(const PanelData& panel, const ModelOrders& orders, const ArmaEstimate& fit,
                     const CorrectionOptions& options, std::uint64_t seed,
                     const std::optional<Vector>& garch_start) {
    StarResult r;
    if (options.zeta_star_lambda == CorrectionMethod::Jackknife) {
        r.correction = jackknife_arma(panel, orders, options, &fit);
    } else {
        CorrectionOptions o = options;
        o.seed = seed;
        r.correction = analytic_correct_arma(panel, fit, o);
    }
    r.lambda_star = r.correction.lambda_corrected;
    GarchFitOptions g = options.garch;
    g.compute_covariance = false;
    if (garch_start) g.warm_start = garch_start;
    r.garch = fit_garch(r.correction.estimate.residuals, orders.L, orders.K, g);
    return r;
}

// Nearest point of the constraint set used when reporting volatility at a
// corrected zeta that left it.
Vector project_feasible(Vector z, double margin) {
    z = z.cwiseMax(0.0);
    const double s = z.sum();
    if (s > 1.0 - margin) z *= (1.0 - margin) / s;
    return z;
}

}  // namespace

GarchCorrection jackknife_garch(const PanelData& panel, const ModelOrders& orders,
                                const CorrectionOptions& options, const ArmaEstimate* arma_fit) {
    const int T = panel.n_periods();
    // Refitted halves are themselves jackknifed for lambda, so quarters must be fittable.
    if (options.refit_half_lambda && options.zeta_star_lambda == CorrectionMethod::Jackknife &&
        T < 4 * (orders.P + orders.Q + 5)) {
        throw ValidationError("jackknife_garch with jackknife lambda needs T >= 4 (P + Q + 5)");
    }
    if (T < 2 * (orders.P + orders.Q + 5)) throw ValidationError("jackknife_garch: T too small");
    ArmaFitOptions full_options = options.arma;
    full_options.compute_covariance = false;
    const ArmaEstimate full = arma_fit ? *arma_fit : fit_arma(panel, orders, full_options);

    GarchCorrection out;
    out.lambda_method = options.zeta_star_lambda;
    const StarResult star = zeta_star(panel, orders, full, options, derive_seed(options.seed, {0}), std::nullopt);
    out.lambda_star = star.lambda_star;
    out.lambda_correction = star.correction;
    out.zeta_star = star.garch.zeta;

    const auto ranges = half_ranges(T);
    for (int k = 0; k < 2; ++k) {
        if (!options.refit_half_lambda) {
            // zeta_star on a half: the same lambda_star residuals, restricted
            // to the half's periods.
            GarchFitOptions g = options.garch;
            g.compute_covariance = false;
            g.warm_start = star.garch.zeta;
            const Matrix res = star.correction.estimate.residuals.middleCols(
                ranges[k].first, ranges[k].second - ranges[k].first);
            out.halves[k] = fit_garch(res, orders.L, orders.K, g).zeta;
            continue;
        }
        const PanelData half = panel.slice_periods(ranges[k].first, ranges[k].second);
        // The full-sample lambda jackknife already fitted this half.
        const ArmaEstimate half_fit = options.zeta_star_lambda == CorrectionMethod::Jackknife
                                          ? star.correction.half_fits[k]
                                          : fit_arma(half, orders, warm(options.arma, full.lambda));
        const StarResult hs = zeta_star(half, orders, half_fit, options,
                                        derive_seed(options.seed, {static_cast<std::uint64_t>(k + 1)}),
                                        star.garch.zeta);
        out.halves[k] = hs.garch.zeta;
    }
    out.zeta_corrected = jackknife_combine(out.zeta_star, out.halves[0], out.halves[1]);

    const Vector z = garch_feasible(out.zeta_corrected, orders.L, orders.K, options.garch.margin)
                         ? out.zeta_corrected
                         : project_feasible(out.zeta_corrected, options.garch.margin);
    out.estimate = evaluate_garch(star.correction.estimate.residuals, orders.L, orders.K, z, options.garch);
    out.estimate.converged = star.garch.converged;
    return out;
}

SandwichCovariance covariance_lambda(const PanelData& panel, const ArmaEstimate& fit) {
    const ModelOrders& orders = fit.orders;
    const double nt = static_cast<double>(panel.n_units()) * panel.n_periods();
    const Eigen::MatrixXd H = arma_hessian(orders, fit.lambda, panel);
    const Eigen::MatrixXd S = arma_unit_scores(orders, fit.lambda, panel);
    return make_sandwich(H / nt, S.transpose() * S / nt, nt);
}

SandwichCovariance covariance_zeta(const PanelData& panel, const ArmaEstimate& arma_fit,
                                   const GarchEstimate& garch_fit, bool lambda_known) {
    const ModelOrders& orders = arma_fit.orders;
    const int L = garch_fit.L, K = garch_fit.K;
    const double nt = static_cast<double>(panel.n_units()) * panel.n_periods();
    const bool c_h_tracks_omega = (garch_fit.c_h - garch_fit.omega).cwiseAbs().maxCoeff() == 0.0;

    const Matrix& resid = arma_fit.residuals;
    const Eigen::MatrixXd S2 =
        garch_unit_scores(garch_fit.zeta, L, K, garch_fit.omega, resid, garch_fit.c_h);
    const Eigen::MatrixXd W = hessian_from_gradient(
        [&](const Vector& z) {
            return Vector(garch_unit_scores(z, L, K, garch_fit.omega, resid, garch_fit.c_h)
                              .colwise()
                              .sum()
                              .transpose());
        },
        garch_fit.zeta);

    Eigen::MatrixXd psi = S2;  // N x (L+K)
    if (!lambda_known && orders.n_lambda() > 0) {
        const Eigen::MatrixXd S1 = arma_unit_scores(orders, arma_fit.lambda, panel);
        const Eigen::MatrixXd H = arma_hessian(orders, arma_fit.lambda, panel);
        const Eigen::MatrixXd J = central_jacobian(
            [&](const Vector& l) {
                const ArmaEstimate e = evaluate_arma(panel, orders, l);
                const Vector omega = variance_target(e.residuals);
                const Vector c_h = c_h_tracks_omega ? omega : garch_fit.c_h;
                return Vector(garch_unit_scores(garch_fit.zeta, L, K, omega, e.residuals, c_h)
                                  .colwise()
                                  .sum()
                                  .transpose());
            },
            arma_fit.lambda);  // (L+K) x dim(lambda)
        psi -= S1 * H.fullPivLu().solve(J.transpose());
    }
    // zeta_hat - zeta ~ -W^{-1} sum psi_i; gamma is the positive-definite -W / NT.
    return make_sandwich(-W / nt, psi.transpose() * psi / nt, nt);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile needs 0 < p < 1");
    // Rational start (Abramowitz-Stegun 26.2.23) refined by Newton steps on erfc.
    const double q = p < 0.5 ? p : 1.0 - p;
    const double t = std::sqrt(-2.0 * std::log(q));
    double x = t - (2.515517 + 0.802853 * t + 0.010328 * t * t) /
                       (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    x = p < 0.5 ? -x : x;
    for (int k = 0; k < 4; ++k) {
        const double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
        x -= (cdf - p) / pdf;
    }
    return x;
}

FixedEffectInference fixed_effect_inference(const ArmaEstimate& arma_fit,
                                            const GarchEstimate& garch_fit, int unit, double level) {
    const Matrix& u = arma_fit.residuals;
    const int N = static_cast<int>(u.rows()), T = static_cast<int>(u.cols());
    if (unit < 0 || unit >= N) throw ValidationError("unit index out of range");
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must lie in (0, 1)");
    if (garch_fit.h.rows() != N || garch_fit.h.cols() != T) {
        throw ValidationError("GARCH fit does not match the ARMA residuals");
    }
    FixedEffectInference out;
    out.unit = unit;
    const double z = normal_quantile(0.5 + 0.5 * level);

    const auto kernel = ConcentrationKernel::make(arma_fit.coefficients().psi, T);
    const double omega = garch_fit.omega[unit];
    out.sigma2_1 = omega * T / kernel.denom;

    double m4 = 0.0;
    for (int i = 0; i < N; ++i) {
        for (int t = 0; t < T; ++t) {
            const double e2 = u(i, t) * u(i, t) / garch_fit.h(i, t);
            m4 += e2 * e2;
        }
    }
    m4 /= static_cast<double>(N) * T;
    out.kurtosis = m4;
    if (!(m4 > 1.0)) throw NumericalError("fourth moment of standardized residuals is not above 1");
    const double eh2 = garch_fit.h.row(unit).squaredNorm() / T;
    const auto coef = garch_fit.coefficients();
    const double one_minus_nu = 1.0 - coef.nu.sum();
    const double one_minus_s = 1.0 - coef.persistence();
    out.sigma2_2 = std::pow(one_minus_nu / one_minus_s, 2) * (m4 - 1.0) * eh2;
    out.sigma2_2_bar = one_minus_nu * one_minus_nu * (m4 - 1.0) * eh2;

    auto make = [&](double est, double var) {
        Interval iv;
        iv.estimate = est;
        iv.se = std::sqrt(var / T);
        iv.lower = est - z * iv.se;
        iv.upper = est + z * iv.se;
        return iv;
    };
    out.mu = make(arma_fit.mu[unit], out.sigma2_1);
    out.omega = make(omega, out.sigma2_2);
    out.varpi = make(garch_fit.varpi[unit], out.sigma2_2_bar);
    return out;
}

}  // namespace pagarch
