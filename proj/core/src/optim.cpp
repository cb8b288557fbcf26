#include "pagarch/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace pagarch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sanitize(double v) { return std::isfinite(v) ? v : kInf; }

struct Simplex {
    std::vector<Vector> x;
    std::vector<double> f;

    void order() {
        std::vector<std::size_t> idx(x.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return f[a] < f[b]; });
        std::vector<Vector> xs;
        std::vector<double> fs;
        for (auto k : idx) {
            xs.push_back(x[k]);
            fs.push_back(f[k]);
        }
        x = std::move(xs);
        f = std::move(fs);
    }

    double diameter() const {
        double d = 0.0;
        for (std::size_t k = 1; k < x.size(); ++k) d = std::max(d, (x[k] - x[0]).lpNorm<Eigen::Infinity>());
        return d;
    }
};

// One Nelder-Mead run; returns when a tolerance is met or the budget is spent.
MinimizeResult run_simplex(const Objective& f, const Vector& x0, double step, int budget,
                           const SimplexOptions& opt) {
    const Eigen::Index n = x0.size();
    MinimizeResult res;
    Simplex s;
    s.x.push_back(x0);
    s.f.push_back(sanitize(f(x0)));
    res.evaluations = 1;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double h = step * std::max(1.0, std::abs(x0[k]));
        // Prefer a feasible vertex: try +h, -h, then shrink.
        Vector best_v = x0;
        double best_f = kInf;
        for (double scale : {1.0, -1.0, 0.5, -0.5, 0.1, -0.1, 0.01, -0.01}) {
            Vector v = x0;
            v[k] += scale * h;
            const double fv = sanitize(f(v));
            ++res.evaluations;
            if (std::isfinite(fv)) {
                best_v = v;
                best_f = fv;
                break;
            }
            if (scale == 1.0) best_v = v;
        }
        s.x.push_back(best_v);
        s.f.push_back(best_f);
    }

    int it = 0;
    bool converged = false;
    while (it < budget) {
        s.order();
        const double fb = s.f.front();
        const double fw = s.f.back();
        if (std::isfinite(fw)) {
            const double spread = std::abs(fw - fb);
            if (spread <= opt.f_rel_tol * std::max(std::abs(fb), 1e-300) || s.diameter() <= opt.x_tol) {
                converged = true;
                break;
            }
        } else if (s.diameter() <= opt.x_tol) {
            converged = std::isfinite(fb);
            break;
        }
        ++it;
        Vector centroid = Vector::Zero(n);
        for (Eigen::Index k = 0; k < n; ++k) centroid += s.x[static_cast<std::size_t>(k)];
        centroid /= static_cast<double>(n);
        Vector& worst = s.x.back();
        const double f_second = s.f[static_cast<std::size_t>(n - 1)];

        const Vector xr = centroid + (centroid - worst);
        const double fr = sanitize(f(xr));
        ++res.evaluations;
        if (fr < fb) {
            const Vector xe = centroid + 2.0 * (centroid - worst);
            const double fe = sanitize(f(xe));
            ++res.evaluations;
            if (fe < fr) {
                worst = xe;
                s.f.back() = fe;
            } else {
                worst = xr;
                s.f.back() = fr;
            }
            continue;
        }
        if (fr < f_second) {
            worst = xr;
            s.f.back() = fr;
            continue;
        }
        // Contraction (outside if the reflection beat the worst point).
        const bool outside = fr < fw;
        const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid))
                                  : Vector(centroid + 0.5 * (worst - centroid));
        const double fc = sanitize(f(xc));
        ++res.evaluations;
        if (fc < (outside ? fr : fw)) {
            worst = xc;
            s.f.back() = fc;
            continue;
        }
        // Shrink towards the best vertex.
        for (std::size_t k = 1; k < s.x.size(); ++k) {
            s.x[k] = s.x[0] + 0.5 * (s.x[k] - s.x[0]);
            s.f[k] = sanitize(f(s.x[k]));
            ++res.evaluations;
        }
    }
    s.order();
    res.x = s.x.front();
    res.f = s.f.front();
    res.iterations = it;
    res.converged = converged;
    return res;
}

}  // namespace

MinimizeResult nelder_mead(const Objective& f, const Vector& x0, const SimplexOptions& options) {
    if (x0.size() == 0) {
        MinimizeResult r;
        r.x = x0;
        r.f = sanitize(f(x0));
        r.evaluations = 1;
        r.converged = std::isfinite(r.f);
        return r;
    }
    MinimizeResult best = run_simplex(f, x0, options.initial_step, options.max_iterations, options);
    // Restart around the optimum with a fresh simplex: a collapsed simplex
    // can stall away from the minimizer.
    int used = best.iterations;
    int evals = best.evaluations;
    for (int restart = 0; restart < 3 && used < options.max_iterations && std::isfinite(best.f);
         ++restart) {
        const double step = options.initial_step * std::pow(0.1, restart + 1);
        MinimizeResult next = run_simplex(f, best.x, step, options.max_iterations - used, options);
        used += next.iterations;
        evals += next.evaluations;
        const double gain = best.f - next.f;
        const bool improved = next.f < best.f;
        if (improved) {
            const bool conv = next.converged;
            best = next;
            best.converged = conv;
        }
        if (!improved || gain <= options.f_rel_tol * std::max(std::abs(best.f), 1e-300)) break;
    }
    best.iterations = used;
    best.evaluations = evals;
    return best;
}

double fd_step(double x) { return std::max(1e-5, 1e-5 * std::abs(x)); }

Vector central_gradient(const Objective& f, const Vector& x) {
    Vector g(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double h = fd_step(x[k]);
        Vector xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        g[k] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

Eigen::MatrixXd central_jacobian(const std::function<Vector(const Vector&)>& g, const Vector& x) {
    Eigen::MatrixXd J;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double h = fd_step(x[k]);
        Vector xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        const Vector d = (g(xp) - g(xm)) / (2.0 * h);
        if (k == 0) J.resize(d.size(), x.size());
        J.col(k) = d;
    }
    return J;
}

Eigen::MatrixXd hessian_from_gradient(const Gradient& grad, const Vector& x) {
    if (x.size() == 0) return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd H = central_jacobian(grad, x);
    return 0.5 * (H + H.transpose());
}

MinimizeResult newton_polish(const Objective& f, const Gradient& grad, const Vector& x0,
                             int max_steps) {
    MinimizeResult r;
    r.x = x0;
    r.f = sanitize(f(x0));
    r.evaluations = 1;
    if (x0.size() == 0 || !std::isfinite(r.f)) return r;
    for (int step = 0; step < max_steps; ++step) {
        const Vector g = grad(r.x);
        if (!g.allFinite()) break;
        Eigen::MatrixXd H = hessian_from_gradient(grad, r.x);
        if (!H.allFinite()) break;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
        Vector d;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0).all()) {
            d = -ldlt.solve(g);
        } else {
            // Levenberg-style shift towards gradient descent.
            const double shift = std::abs(H.diagonal().maxCoeff()) + 1e-8;
            d = -(H + shift * Eigen::MatrixXd::Identity(H.rows(), H.cols())).ldlt().solve(g);
        }
        if (!d.allFinite()) break;
        bool accepted = false;
        double a = 1.0;
        for (int bt = 0; bt < 12; ++bt, a *= 0.5) {
            const Vector xn = r.x + a * d;
            const double fn = sanitize(f(xn));
            ++r.evaluations;
            if (fn < r.f) {
                r.x = xn;
                r.f = fn;
                accepted = true;
                break;
            }
        }
        ++r.iterations;
        if (!accepted || (a * d).lpNorm<Eigen::Infinity>() < 1e-12) break;
    }
    r.converged = true;
    return r;
}

MinimizeResult bfgs(const Objective& f, const Gradient& grad, const Vector& x0, int max_iterations,
                    double g_tol) {
    const Eigen::Index n = x0.size();
    MinimizeResult r;
    r.x = x0;
    r.f = sanitize(f(x0));
    r.evaluations = 1;
    if (n == 0 || !std::isfinite(r.f)) {
        r.converged = std::isfinite(r.f);
        return r;
    }
    Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);
    Vector g = grad(r.x);
    for (int it = 0; it < max_iterations; ++it) {
        if (g.lpNorm<Eigen::Infinity>() <= g_tol * std::max(1.0, std::abs(r.f))) {
            r.converged = true;
            break;
        }
        Vector d = -Hinv * g;
        if (d.dot(g) >= 0) {
            Hinv.setIdentity();
            d = -g;
        }
        double a = 1.0;
        Vector xn;
        double fn = kInf;
        for (int bt = 0; bt < 40; ++bt, a *= 0.5) {
            xn = r.x + a * d;
            fn = sanitize(f(xn));
            ++r.evaluations;
            if (fn <= r.f + 1e-4 * a * g.dot(d)) break;
        }
        if (!(fn < r.f)) {
            r.converged = true;
            break;
        }
        const Vector gn = grad(xn);
        const Vector s = xn - r.x;
        const Vector y = gn - g;
        const double sy = s.dot(y);
        if (sy > 1e-12) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) +
                   rho * s * s.transpose();
        }
        const double rel = std::abs(r.f - fn) / std::max(std::abs(r.f), 1e-300);
        r.x = xn;
        r.f = fn;
        g = gn;
        r.iterations = it + 1;
        if (rel < 1e-14) {
            r.converged = true;
            break;
        }
    }
    return r;
}

}  // namespace pagarch
