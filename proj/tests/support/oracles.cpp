#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace oracle {

Eigen::MatrixXd lag_matrix(const Vector& c, int T) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(T, T);
    for (int k = 1; k <= c.size(); ++k) {
        for (int t = k; t < T; ++t) m(t, t - k) = c[k - 1];
    }
    return m;
}

namespace {

struct Parts {
    Vector beta, phi, psi;
};

Parts split(const ModelOrders& o, const Vector& lambda) {
    return {lambda.segment(0, o.Dx), lambda.segment(o.Dx, o.P), lambda.segment(o.Dx + o.P, o.Q)};
}

Vector mean_target(const PanelData& panel, const Parts& p, int i) {
    const int T = panel.n_periods();
    Vector y = panel.y.row(i).transpose();
    Vector e = lag_matrix(-p.phi, T) * y;
    for (int d = 0; d < p.beta.size(); ++d) e -= p.beta[d] * Vector(panel.x[static_cast<std::size_t>(d)].row(i).transpose());
    return e;
}

}  // namespace

double dense_concentrated_objective(const PanelData& panel, const ModelOrders& orders, const Vector& lambda) {
    const Parts p = split(orders, lambda);
    const int T = panel.n_periods();
    const Eigen::MatrixXd B = lag_matrix(p.psi, T);
    const Eigen::MatrixXd Sinv = (B * B.transpose()).inverse();
    const Vector l = Vector::Ones(T);
    const Vector Sl = Sinv * l;
    const Eigen::MatrixXd C = Sinv - Sl * Sl.transpose() / l.dot(Sl);
    double q = 0.0;
    for (int i = 0; i < panel.n_units(); ++i) {
        const Vector e = mean_target(panel, p, i);
        q += e.dot(C * e);
    }
    return q;
}

Vector dense_mu(const PanelData& panel, const ModelOrders& orders, const Vector& lambda) {
    const Parts p = split(orders, lambda);
    const int T = panel.n_periods();
    const Eigen::MatrixXd B = lag_matrix(p.psi, T);
    const Eigen::MatrixXd Sinv = (B * B.transpose()).inverse();
    const Vector l = Vector::Ones(T);
    Vector mu(panel.n_units());
    for (int i = 0; i < panel.n_units(); ++i) mu[i] = l.dot(Sinv * mean_target(panel, p, i)) / l.dot(Sinv * l);
    return mu;
}

Matrix plain_residuals(const PanelData& panel, const ModelOrders& orders, const Vector& mu, const Vector& lambda) {
    const Parts p = split(orders, lambda);
    const int N = panel.n_units(), T = panel.n_periods();
    Matrix u = Matrix::Zero(N, T);
    for (int i = 0; i < N; ++i) {
        for (int t = 0; t < T; ++t) {
            double v = panel.y(i, t) - mu[i];
            for (int d = 0; d < p.beta.size(); ++d) v -= p.beta[d] * panel.x[static_cast<std::size_t>(d)](i, t);
            for (int k = 1; k <= p.phi.size(); ++k) {
                if (t - k >= 0) v -= p.phi[k - 1] * panel.y(i, t - k);
            }
            for (int k = 1; k <= p.psi.size(); ++k) {
                if (t - k >= 0) v -= p.psi[k - 1] * u(i, t - k);
            }
            u(i, t) = v;
        }
    }
    return u;
}

Eigen::Vector2d within_estimator(const PanelData& panel) {
    const int N = panel.n_units(), T = panel.n_periods();
    Eigen::Matrix2d xx = Eigen::Matrix2d::Zero();
    Eigen::Vector2d xy = Eigen::Vector2d::Zero();
    for (int i = 0; i < N; ++i) {
        double mx = 0, ml = 0, my = 0;
        for (int t = 0; t < T; ++t) {
            mx += panel.x[0](i, t);
            ml += t > 0 ? panel.y(i, t - 1) : 0.0;
            my += panel.y(i, t);
        }
        mx /= T;
        ml /= T;
        my /= T;
        for (int t = 0; t < T; ++t) {
            const Eigen::Vector2d z(panel.x[0](i, t) - mx, (t > 0 ? panel.y(i, t - 1) : 0.0) - ml);
            xx += z * z.transpose();
            xy += z * (panel.y(i, t) - my);
        }
    }
    return xx.ldlt().solve(xy);
}

std::pair<double, double> enumerate_lq_iid(const pagarch::LQProblem& problem, const std::array<double, 3>& support,
                                           const std::array<double, 3>& probs) {
    const int n = problem.N * problem.T;
    long total = 1;
    for (int k = 0; k < n; ++k) total *= 3;
    double m1 = 0.0, m2 = 0.0;
    Vector v(n);
    for (long code = 0; code < total; ++code) {
        long c = code;
        double pr = 1.0;
        for (int k = 0; k < n; ++k) {
            const int s = static_cast<int>(c % 3);
            c /= 3;
            v[k] = support[static_cast<std::size_t>(s)];
            pr *= probs[static_cast<std::size_t>(s)];
        }
        if (pr == 0.0) continue;
        const double q = problem.evaluate(v);
        m1 += pr * q;
        m2 += pr * q * q;
    }
    return {m1, m2 - m1 * m1};
}

void DependentMds::enumerate(int T, const std::function<void(const std::vector<double>&, double)>& visit) const {
    const int n = T + 2;
    long total = 1;
    for (int k = 0; k < n; ++k) total *= 3;
    std::vector<double> e(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(T));
    for (long code = 0; code < total; ++code) {
        long c = code;
        double pr = 1.0;
        for (int k = 0; k < n; ++k) {
            const int s = static_cast<int>(c % 3);
            c /= 3;
            e[static_cast<std::size_t>(k)] = support[static_cast<std::size_t>(s)];
            pr *= probs[static_cast<std::size_t>(s)];
        }
        if (pr == 0.0) continue;
        // e[0], e[1] are the two pre-sample draws.
        for (int t = 0; t < T; ++t) {
            const auto k = static_cast<std::size_t>(t + 2);
            v[static_cast<std::size_t>(t)] = e[k] * (1.0 + this->c * e[k - 1] * e[k - 2]);
        }
        visit(v, pr);
    }
}

pagarch::UnitMoments DependentMds::moments(int T) const {
    const auto sz = static_cast<std::size_t>(T);
    std::vector<double> m2(sz, 0.0), m3(sz, 0.0), m4(sz, 0.0);
    std::vector<std::vector<double>> e22(sz, std::vector<double>(sz, 0.0)), e31 = e22, e21 = e22;
    std::vector<double> e211(sz * sz * sz, 0.0);
    enumerate(T, [&](const std::vector<double>& v, double p) {
        for (std::size_t t = 0; t < sz; ++t) {
            const double a = v[t];
            m2[t] += p * a * a;
            m3[t] += p * a * a * a;
            m4[t] += p * a * a * a * a;
            for (std::size_t s = 0; s < sz; ++s) {
                e22[t][s] += p * a * a * v[s] * v[s];
                e31[t][s] += p * a * a * a * v[s];
                e21[t][s] += p * a * a * v[s];
                for (std::size_t r = 0; r < sz; ++r) e211[(t * sz + s) * sz + r] += p * a * a * v[s] * v[r];
            }
        }
    });
    pagarch::UnitMoments u;
    u.sigma2 = m2[0];
    u.pi = m3[0];
    u.rho4 = m4[0];
    const double s4 = u.sigma2 * u.sigma2;
    u.varsigma = [e22, s4](int t, int s) { return e22[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)] - s4; };
    u.varrho = [e31](int t, int s) { return e31[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)]; };
    u.pi_cross = [e21](int t, int s) { return e21[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)]; };
    u.vartheta = [e211, sz](int t, int a, int c) {
        return e211[(static_cast<std::size_t>(t) * sz + static_cast<std::size_t>(a)) * sz + static_cast<std::size_t>(c)];
    };
    return u;
}

std::pair<double, double> enumerate_lq_dependent(const pagarch::LQProblem& problem, const DependentMds& mds) {
    // Units are independent copies; enumerate unit by unit only for N = 1.
    if (problem.N != 1) throw std::invalid_argument("enumerate_lq_dependent: N must be 1");
    double m1 = 0.0, m2 = 0.0;
    Vector v(problem.T);
    mds.enumerate(problem.T, [&](const std::vector<double>& path, double p) {
        for (int t = 0; t < problem.T; ++t) v[t] = path[static_cast<std::size_t>(t)];
        const double q = problem.evaluate(v);
        m1 += p * q;
        m2 += p * q * q;
    });
    return {m1, m2 - m1 * m1};
}

double plain_vt_loglik(const Matrix& u, double tau, double nu, const Vector& omega, const Vector& c_h) {
    double L = 0.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        double h_prev = c_h[i], u_prev = 0.0;
        for (Eigen::Index t = 0; t < u.cols(); ++t) {
            const double h = omega[i] * (1.0 - tau - nu) + tau * u_prev * u_prev + nu * h_prev;
            L += -0.5 * (std::log(h) + u(i, t) * u(i, t) / h);
            h_prev = h;
            u_prev = u(i, t);
        }
    }
    return L;
}

}  // namespace oracle

namespace oracle {

PanelData random_panel(pagarch::Rng& rng, int N, int T, int Dx) {
    std::normal_distribution<double> z;
    PanelData p;
    p.y = Matrix(N, T);
    for (int i = 0; i < N; ++i)
        for (int t = 0; t < T; ++t) p.y(i, t) = z(rng);
    for (int d = 0; d < Dx; ++d) {
        Matrix x(N, T);
        for (int i = 0; i < N; ++i)
            for (int t = 0; t < T; ++t) x(i, t) = z(rng);
        p.x.push_back(x);
    }
    return p;
}

Vector random_valid_lambda(pagarch::Rng& rng, const ModelOrders& orders) {
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (;;) {
        Vector lam(orders.n_lambda());
        for (Eigen::Index k = 0; k < lam.size(); ++k) lam[k] = k < orders.Dx ? 3.0 * u(rng) : u(rng) / std::max(1, k < orders.Dx + orders.P ? orders.P : orders.Q);
        const auto c = pagarch::ArmaCoefficients::unpack(lam, orders);
        if (pagarch::validate_arma(c.phi, c.psi).valid) return lam;
    }
}

pagarch::SimulationSpec design_spec(int N, int T, std::uint64_t seed, int burn_in) {
    pagarch::SimulationSpec spec;
    spec.orders = {1, 1, 1, 1, 1};
    spec.n_periods = T;
    spec.burn_in = burn_in;
    spec.arma.coef.beta = Vector::Constant(1, 3.0);
    spec.arma.coef.phi = Vector::Constant(1, 0.3);
    spec.arma.coef.psi = Vector::Constant(1, 0.3);
    spec.garch.coef.tau = Vector::Constant(1, 0.2);
    spec.garch.coef.nu = Vector::Constant(1, 0.4);
    pagarch::Rng rng(pagarch::derive_seed(seed, {0xfe}));
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> w(1.0, 3.0);
    spec.arma.mu = Vector(N);
    spec.garch.omega = Vector(N);
    for (int i = 0; i < N; ++i) {
        spec.arma.mu[i] = z(rng);
        spec.garch.omega[i] = w(rng);
    }
    return spec;
}

pagarch::SimulationResult design_panel(int N, int T, std::uint64_t seed, int burn_in) {
    return pagarch::simulate_detailed(design_spec(N, T, seed, burn_in), seed);
}

}  // namespace oracle
