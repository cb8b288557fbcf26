#include "pagarch/arma_ls.hpp"

#include "detail/recursions.hpp"
#include "pagarch/bias_inference.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace pagarch {

ConcentrationKernel ConcentrationKernel::make(const Vector& psi, int T) {
    ConcentrationKernel k;
    k.w.resize(T);
    k.sigma_psi_inv_l.resize(T);
    const Vector ones = Vector::Ones(T);
    detail::ma_inverse(std::span<const double>(ones.data(), T), psi, std::span<double>(k.w.data(), T));
    detail::ma_inverse_transposed(std::span<const double>(k.w.data(), T), psi,
                                  std::span<double>(k.sigma_psi_inv_l.data(), T));
    k.denom = k.w.squaredNorm();
    return k;
}

namespace {

void require_valid(const ModelOrders& orders, const Vector& lambda) {
    if (lambda.size() != orders.n_lambda()) throw ValidationError("lambda has the wrong length");
    const auto c = ArmaCoefficients::unpack(lambda, orders);
    const auto v = validate_arma(c.phi, c.psi);
    if (!v.valid) throw ValidationError("lambda outside the parameter space: " + v.reason);
}

// Per-unit evaluation of the concentrated objective over periods [skip, T).
class UnitEvaluator {
public:
    UnitEvaluator(const PanelData& panel, const ModelOrders& orders, const ArmaCoefficients& coef,
                  int skip)
        : panel_(panel), orders_(orders), coef_(coef), skip_(skip), T_(panel.n_periods()),
          v_(T_), z_(T_), w_(T_), u_(T_), d_(T_), src_(T_) {
        const std::vector<double> ones(T_, 1.0);
        detail::ma_inverse(ones, coef_.psi, w_);
        for (int t = skip_; t < T_; ++t) ww_ += w_[t] * w_[t];
    }

    // Returns (mu_hat, Q_i); fills residuals into u_.
    std::pair<double, double> evaluate(int i) {
        detail::ar_transform(panel_, i, coef_, v_);
        detail::ma_inverse(v_, coef_.psi, z_);
        double wz = 0.0;
        for (int t = skip_; t < T_; ++t) wz += w_[t] * z_[t];
        const double mu = wz / ww_;
        double q = 0.0;
        for (int t = 0; t < T_; ++t) {
            u_[t] = z_[t] - mu * w_[t];
            if (t >= skip_) q += u_[t] * u_[t];
        }
        return {mu, q};
    }

    // d/d lambda of sum_{t>=skip} u_t^2 at fixed mu (envelope theorem); call
    // after evaluate(i).
    void gradient(int i, double* g) {
        const int D = orders_.Dx, P = orders_.P, Q = orders_.Q;
        int col = 0;
        auto accumulate = [&](auto fill_source) {
            fill_source();
            detail::ma_inverse(src_, coef_.psi, d_);
            double acc = 0.0;
            for (int t = skip_; t < T_; ++t) acc += u_[t] * d_[t];
            g[col++] = 2.0 * acc;
        };
        for (int d = 0; d < D; ++d) {
            accumulate([&] {
                for (int t = 0; t < T_; ++t) src_[t] = -panel_.x[d](i, t);
            });
        }
        for (int p = 1; p <= P; ++p) {
            accumulate([&] {
                for (int t = 0; t < T_; ++t) src_[t] = t - p >= 0 ? -panel_.y(i, t - p) : 0.0;
            });
        }
        for (int q = 1; q <= Q; ++q) {
            accumulate([&] {
                for (int t = 0; t < T_; ++t) src_[t] = t - q >= 0 ? -u_[t - q] : 0.0;
            });
        }
    }

    const std::vector<double>& residuals() const { return u_; }

private:
    const PanelData& panel_;
    const ModelOrders& orders_;
    const ArmaCoefficients& coef_;
    int skip_;
    int T_;
    double ww_ = 0.0;
    std::vector<double> v_, z_, w_, u_, d_, src_;
};

}  // namespace

Vector concentrate_mu(const ModelOrders& orders, const Vector& lambda, const PanelData& panel) {
    require_valid(orders, lambda);
    const auto coef = ArmaCoefficients::unpack(lambda, orders);
    const int T = panel.n_periods();
    const auto kernel = ConcentrationKernel::make(coef.psi, T);
    Vector mu(panel.n_units());
    std::vector<double> v(static_cast<std::size_t>(T));
    for (int i = 0; i < panel.n_units(); ++i) {
        detail::ar_transform(panel, i, coef, v);
        double acc = 0.0;
        for (int t = 0; t < T; ++t) acc += kernel.sigma_psi_inv_l[t] * v[t];
        mu[i] = acc / kernel.denom;
    }
    return mu;
}

double concentrated_objective(const ModelOrders& orders, const Vector& lambda,
                              const PanelData& panel) {
    require_valid(orders, lambda);
    const auto coef = ArmaCoefficients::unpack(lambda, orders);
    UnitEvaluator ev(panel, orders, coef, 0);
    double q = 0.0;
    for (int i = 0; i < panel.n_units(); ++i) q += ev.evaluate(i).second;
    return q;
}

double concentrated_objective_or_inf(const ModelOrders& orders, const Vector& lambda,
                                     const PanelData& panel) {
    if (!lambda.allFinite()) return std::numeric_limits<double>::infinity();
    const auto coef = ArmaCoefficients::unpack(lambda, orders);
    if (!validate_arma(coef.phi, coef.psi).valid) return std::numeric_limits<double>::infinity();
    UnitEvaluator ev(panel, orders, coef, 0);
    double q = 0.0;
    for (int i = 0; i < panel.n_units(); ++i) q += ev.evaluate(i).second;
    return q;
}

Eigen::MatrixXd arma_unit_scores(const ModelOrders& orders, const Vector& lambda,
                                 const PanelData& panel) {
    require_valid(orders, lambda);
    const auto coef = ArmaCoefficients::unpack(lambda, orders);
    UnitEvaluator ev(panel, orders, coef, 0);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> g(panel.n_units(),
                                                                            orders.n_lambda());
    for (int i = 0; i < panel.n_units(); ++i) {
        ev.evaluate(i);
        ev.gradient(i, g.row(i).data());
    }
    return g;
}

Vector arma_gradient(const ModelOrders& orders, const Vector& lambda, const PanelData& panel) {
    return arma_gradient_windowed(orders, lambda, panel, 0);
}

Vector arma_gradient_windowed(const ModelOrders& orders, const Vector& lambda,
                              const PanelData& panel, int skip) {
    require_valid(orders, lambda);
    if (skip < 0 || skip >= panel.n_periods()) throw ValidationError("invalid objective window");
    const auto coef = ArmaCoefficients::unpack(lambda, orders);
    UnitEvaluator ev(panel, orders, coef, skip);
    Vector total = Vector::Zero(orders.n_lambda());
    Vector g(orders.n_lambda());
    for (int i = 0; i < panel.n_units(); ++i) {
        ev.evaluate(i);
        ev.gradient(i, g.data());
        total += g;
    }
    return total;
}

Eigen::MatrixXd arma_hessian(const ModelOrders& orders, const Vector& lambda,
                             const PanelData& panel) {
    return hessian_from_gradient(
        [&](const Vector& l) {
            const auto c = ArmaCoefficients::unpack(l, orders);
            if (!validate_arma(c.phi, c.psi).valid) {
                return Vector(Vector::Constant(l.size(), std::numeric_limits<double>::quiet_NaN()));
            }
            return arma_gradient(orders, l, panel);
        },
        lambda);
}

Vector within_ols_start(const PanelData& panel, const ModelOrders& orders) {
    const int N = panel.n_units(), T = panel.n_periods();
    const int k = orders.Dx + orders.P;
    Vector out = Vector::Zero(k);
    if (k == 0) return out;
    Eigen::MatrixXd XtX = Eigen::MatrixXd::Zero(k, k);
    Vector Xty = Vector::Zero(k);
    Eigen::MatrixXd Xi(T, k);
    Vector yi(T);
    for (int i = 0; i < N; ++i) {
        for (int t = 0; t < T; ++t) {
            yi[t] = panel.y(i, t);
            for (int d = 0; d < orders.Dx; ++d) Xi(t, d) = panel.x[d](i, t);
            for (int p = 1; p <= orders.P; ++p) Xi(t, orders.Dx + p - 1) = t - p >= 0 ? panel.y(i, t - p) : 0.0;
        }
        yi.array() -= yi.mean();
        Xi.rowwise() -= Xi.colwise().mean();
        XtX.noalias() += Xi.transpose() * Xi;
        Xty.noalias() += Xi.transpose() * yi;
    }
    out = XtX.colPivHouseholderQr().solve(Xty);
    if (!out.allFinite()) out.setZero();
    return out;
}

ArmaEstimate evaluate_arma(const PanelData& panel, const ModelOrders& orders, const Vector& lambda) {
    require_valid(orders, lambda);
    const auto coef = ArmaCoefficients::unpack(lambda, orders);
    UnitEvaluator ev(panel, orders, coef, 0);
    ArmaEstimate est;
    est.orders = orders;
    est.lambda = lambda;
    est.mu.resize(panel.n_units());
    est.residuals.resize(panel.n_units(), panel.n_periods());
    double q = 0.0;
    for (int i = 0; i < panel.n_units(); ++i) {
        const auto [mu, qi] = ev.evaluate(i);
        est.mu[i] = mu;
        q += qi;
        const auto& u = ev.residuals();
        for (int t = 0; t < panel.n_periods(); ++t) est.residuals(i, t) = u[t];
    }
    est.objective = q;
    return est;
}

namespace {

// Pulls AR coefficients towards zero until the AR polynomial is stationary.
Vector make_stationary(Vector phi) {
    for (int k = 0; k < 60 && !validate_arma(phi, Vector()).valid; ++k) phi *= 0.9;
    return phi;
}

}  // namespace

ArmaEstimate fit_arma(const PanelData& panel, const ModelOrders& orders,
                      const ArmaFitOptions& options) {
    panel.validate_for(orders);
    if (panel.n_periods() <= orders.P + orders.Q + 2) {
        throw ValidationError("fit_arma needs T > P + Q + 2");
    }
    const int dim = orders.n_lambda();

    std::vector<Vector> starts;
    if (options.warm_start) {
        if (options.warm_start->size() != dim) throw ValidationError("warm start has the wrong length");
        starts.push_back(*options.warm_start);
    } else {
        const Vector ols = within_ols_start(panel, orders);
        Vector base(dim);
        base.head(orders.Dx) = ols.head(orders.Dx);
        base.segment(orders.Dx, orders.P) = make_stationary(ols.segment(orders.Dx, orders.P));
        base.tail(orders.Q).setZero();
        starts.push_back(base);
        if (orders.Q > 0) {
            for (double s : {0.3, -0.3}) {
                Vector v = base;
                v.tail(orders.Q).setConstant(s);
                starts.push_back(v);
            }
        }
    }

    const Objective f = [&](const Vector& l) { return concentrated_objective_or_inf(orders, l, panel); };
    const Gradient grad = [&](const Vector& l) {
        const auto c = ArmaCoefficients::unpack(l, orders);
        if (!validate_arma(c.phi, c.psi).valid) {
            return Vector(Vector::Constant(l.size(), std::numeric_limits<double>::quiet_NaN()));
        }
        return arma_gradient(orders, l, panel);
    };

    bool have = false;
    MinimizeResult best;
    int iterations = 0;
    for (const Vector& s0 : starts) {
        if (!std::isfinite(f(s0))) continue;
        MinimizeResult r = options.optimizer == ArmaOptimizer::Simplex
                               ? nelder_mead(f, s0, options.simplex)
                               : bfgs(f, grad, s0);
        iterations += r.iterations;
        if (options.polish && std::isfinite(r.f)) {
            const MinimizeResult p = newton_polish(f, grad, r.x);
            if (p.f <= r.f) {
                r.x = p.x;
                r.f = p.f;
            }
        }
        if (!std::isfinite(r.f)) continue;
        const bool tie = have && std::abs(r.f - best.f) < 1e-12 * std::max(1.0, std::abs(best.f));
        if (!have || (tie ? r.x.norm() < best.x.norm() : r.f < best.f)) {
            best = r;
            have = true;
        }
    }
    if (!have) throw NumericalError("fit_arma: no start produced a valid-region minimizer");

    ArmaEstimate est = evaluate_arma(panel, orders, best.x);
    est.iterations = iterations;
    // Converged when the simplex met its tolerance or the gradient vanishes
    // at the polished point.
    const Vector g = arma_gradient(orders, best.x, panel);
    const double scale = std::max(1.0, est.objective) / std::sqrt(static_cast<double>(panel.n_units()) * panel.n_periods());
    est.converged = best.converged || g.lpNorm<Eigen::Infinity>() <= 1e-6 * scale;
    if (options.compute_covariance && dim > 0) {
        try {
            est.covariance_lambda = covariance_lambda(panel, est).covariance();
        } catch (const NumericalError&) {
            est.covariance_lambda.resize(0, 0);
        }
    }
    return est;
}

}  // namespace pagarch
