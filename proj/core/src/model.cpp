#include "pagarch/model.hpp"

#include "detail/recursions.hpp"
#include "pagarch/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pagarch {

int ModelOrders::max_lag() const { return std::max({P, Q, L, K}); }

void ModelOrders::validate() const {
    if (P < 0 || Q < 0 || L < 0 || K < 0 || Dx < 0) {
        throw ValidationError("model orders must be nonnegative");
    }
    if (K >= 1 && L == 0) {
        throw ValidationError("a GARCH order K >= 1 requires at least one ARCH lag (L >= 1)");
    }
}

void PanelData::validate() const {
    if (y.rows() < 1 || y.cols() < 1) throw ValidationError("panel must have N >= 1 and T >= 1");
    if (!y.allFinite()) throw ValidationError("panel response contains non-finite cells");
    for (std::size_t d = 0; d < x.size(); ++d) {
        if (x[d].rows() != y.rows() || x[d].cols() != y.cols()) {
            throw ValidationError("regressor " + std::to_string(d + 1) + " has shape " +
                                  std::to_string(x[d].rows()) + "x" + std::to_string(x[d].cols()) +
                                  ", expected " + std::to_string(y.rows()) + "x" +
                                  std::to_string(y.cols()));
        }
        if (!x[d].allFinite()) {
            throw ValidationError("regressor " + std::to_string(d + 1) + " contains non-finite cells");
        }
    }
    if (!unit_ids.empty() && static_cast<Eigen::Index>(unit_ids.size()) != y.rows()) {
        throw ValidationError("unit_ids length does not match N");
    }
}

void PanelData::validate_for(const ModelOrders& orders) const {
    orders.validate();
    validate();
    if (n_regressors() != orders.Dx) {
        throw ValidationError("panel has " + std::to_string(n_regressors()) +
                              " regressors but the model expects D_x = " + std::to_string(orders.Dx));
    }
    if (n_periods() < orders.max_lag() + 2) {
        throw ValidationError("T = " + std::to_string(n_periods()) +
                              " is too short for the requested lag orders");
    }
}

PanelData PanelData::slice_periods(int begin, int end) const {
    if (begin < 0 || end > n_periods() || begin >= end) {
        throw ValidationError("invalid period slice");
    }
    PanelData out;
    out.y = y.middleCols(begin, end - begin);
    out.x.reserve(x.size());
    for (const auto& xd : x) out.x.push_back(xd.middleCols(begin, end - begin));
    out.unit_ids = unit_ids;
    return out;
}

PanelData PanelData::unit(int i) const {
    if (i < 0 || i >= n_units()) throw ValidationError("unit index out of range");
    PanelData out;
    out.y = y.middleRows(i, 1);
    for (const auto& xd : x) out.x.push_back(xd.middleRows(i, 1));
    if (!unit_ids.empty()) out.unit_ids = {unit_ids[static_cast<std::size_t>(i)]};
    return out;
}

std::string PanelData::unit_label(int i) const {
    if (unit_ids.empty()) return std::to_string(i);
    return unit_ids[static_cast<std::size_t>(i)];
}

Vector ArmaCoefficients::pack() const {
    Vector out(beta.size() + phi.size() + psi.size());
    out << beta, phi, psi;
    return out;
}

ArmaCoefficients ArmaCoefficients::unpack(const Vector& lambda, const ModelOrders& orders) {
    if (lambda.size() != orders.n_lambda()) {
        throw ValidationError("lambda has length " + std::to_string(lambda.size()) + ", expected " +
                              std::to_string(orders.n_lambda()));
    }
    ArmaCoefficients c;
    c.beta = lambda.segment(0, orders.Dx);
    c.phi = lambda.segment(orders.Dx, orders.P);
    c.psi = lambda.segment(orders.Dx + orders.P, orders.Q);
    return c;
}

Vector GarchCoefficients::pack() const {
    Vector out(tau.size() + nu.size());
    out << tau, nu;
    return out;
}

GarchCoefficients GarchCoefficients::unpack(const Vector& zeta, int L, int K) {
    if (zeta.size() != L + K) throw ValidationError("zeta length does not match (L, K)");
    return {zeta.segment(0, L), zeta.segment(L, K)};
}

Vector GarchParams::varpi() const { return omega * (1.0 - coef.persistence()); }

void GarchParams::validate(double margin) const {
    if ((coef.tau.array() < 0.0).any() || (coef.nu.array() < 0.0).any()) {
        throw ValidationError("GARCH coefficients must be nonnegative");
    }
    if (coef.persistence() > 1.0 - margin) {
        throw ValidationError("GARCH persistence sum(tau) + sum(nu) exceeds 1 - margin");
    }
    if ((omega.array() <= 0.0).any()) {
        throw ValidationError("unconditional variances omega_i must be positive");
    }
}

std::vector<std::complex<double>> lag_polynomial_roots(const Vector& c) {
    // Trailing zero coefficients lower the degree.
    Eigen::Index n = c.size();
    while (n > 0 && c[n - 1] == 0.0) --n;
    std::vector<std::complex<double>> roots;
    if (n == 0) return roots;
    // 1 + sum c_k z^k = 0  <=>  r^n + c_1 r^{n-1} + ... + c_n = 0 with r = 1/z.
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) companion(0, k) = -c[k];
    for (Eigen::Index k = 1; k < n; ++k) companion(k, k - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
    for (Eigen::Index k = 0; k < n; ++k) {
        const std::complex<double> r = es.eigenvalues()[k];
        if (std::abs(r) > 0.0) roots.push_back(1.0 / r);
    }
    return roots;
}

namespace {

std::string format_root(std::complex<double> z) {
    std::ostringstream os;
    os.precision(6);
    os << z.real();
    if (z.imag() != 0.0) os << (z.imag() > 0 ? "+" : "-") << std::abs(z.imag()) << "i";
    return os.str();
}

}  // namespace

ArmaValidity validate_arma(const Vector& phi, const Vector& psi) {
    ArmaValidity out;
    if (!phi.allFinite() || !psi.allFinite()) {
        out.valid = false;
        out.reason = "non-finite ARMA coefficient";
        return out;
    }
    const auto ar_roots = lag_polynomial_roots(-phi);
    const auto ma_roots = lag_polynomial_roots(psi);
    for (const auto& z : ar_roots) {
        if (std::abs(z) <= 1.0 + kRootMargin) {
            out.valid = false;
            out.offending_roots.push_back(z);
            out.reason = "AR polynomial root " + format_root(z) + " on or inside the unit circle";
        }
    }
    if (!out.valid) return out;
    for (const auto& z : ma_roots) {
        if (std::abs(z) <= 1.0 + kRootMargin) {
            out.valid = false;
            out.offending_roots.push_back(z);
            out.reason = "MA polynomial root " + format_root(z) + " on or inside the unit circle";
        }
    }
    if (!out.valid) return out;
    for (const auto& a : ar_roots) {
        for (const auto& b : ma_roots) {
            if (std::abs(a - b) <= kCommonRootTol * std::max(std::abs(a), std::abs(b))) {
                out.valid = false;
                out.offending_roots.push_back(a);
                out.reason = "AR and MA polynomials share the root " + format_root(a);
                return out;
            }
        }
    }
    return out;
}

Matrix residual_filter(const PanelData& panel, const ArmaParams& params) {
    const int N = panel.n_units();
    const int T = panel.n_periods();
    if (params.mu.size() != N) throw ValidationError("mu length does not match N");
    if (params.coef.beta.size() != panel.n_regressors()) {
        throw ValidationError("beta length does not match the panel's regressor count");
    }
    Matrix u(N, T);
    std::vector<double> v(static_cast<std::size_t>(T));
    for (int i = 0; i < N; ++i) {
        detail::ar_transform(panel, i, params.coef, v);
        for (double& vt : v) vt -= params.mu[i];
        detail::ma_inverse(v, params.coef.psi, std::span<double>(u.row(i).data(), T));
    }
    return u;
}

Matrix garch_filter(const Matrix& u, const GarchCoefficients& coef, const Vector& omega,
                    const Vector& c_h) {
    const auto N = u.rows();
    const auto T = u.cols();
    if (omega.size() != N || c_h.size() != N) {
        throw ValidationError("omega and c_h must have one entry per unit");
    }
    if ((omega.array() <= 0.0).any()) throw ValidationError("omega_i must be positive");
    if ((c_h.array() <= 0.0).any()) throw ValidationError("c_h must be positive");
    Matrix h(N, T);
    std::vector<double> u2(static_cast<std::size_t>(T));
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index t = 0; t < T; ++t) u2[t] = u(i, t) * u(i, t);
        detail::garch_recursion(u2, coef, omega[i], c_h[i], std::span<double>(h.row(i).data(), T));
    }
    return h;
}

Matrix garch_filter(const Matrix& u, const GarchCoefficients& coef, const Vector& omega,
                    double c_h) {
    return garch_filter(u, coef, omega, Vector::Constant(u.rows(), c_h));
}

void Innovation::validate() const {
    if (kind == Kind::StudentT && !(df > 4.0)) {
        throw ValidationError("Student-t innovations need df > 4 for a finite fourth moment");
    }
}

SimulationResult simulate_detailed(const SimulationSpec& spec, std::uint64_t seed) {
    const ModelOrders& o = spec.orders;
    o.validate();
    spec.innovation.validate();
    const int N = static_cast<int>(spec.arma.mu.size());
    const int T = spec.n_periods;
    if (N < 1 || T < 1) throw ValidationError("simulation needs N >= 1 and T >= 1");
    if (spec.burn_in < 0) throw ValidationError("burn_in must be nonnegative");
    const auto& c = spec.arma.coef;
    if (c.beta.size() != o.Dx || c.phi.size() != o.P || c.psi.size() != o.Q) {
        throw ValidationError("ARMA coefficient lengths do not match the model orders");
    }
    if (spec.garch.coef.tau.size() != o.L || spec.garch.coef.nu.size() != o.K ||
        spec.garch.omega.size() != N) {
        throw ValidationError("GARCH parameter lengths do not match the model orders");
    }
    const auto validity = validate_arma(c.phi, c.psi);
    if (!validity.valid) throw ValidationError("invalid ARMA parameters: " + validity.reason);
    spec.garch.validate();

    const int total = spec.burn_in + T;
    const int off = spec.burn_in;
    SimulationResult out;
    out.panel.y.resize(N, T);
    out.panel.x.assign(static_cast<std::size_t>(o.Dx), Matrix(N, T));
    out.u.resize(N, T);
    out.h.resize(N, T);
    out.eps.resize(N, T);

    const auto& g = spec.garch.coef;
    std::vector<double> y(total), u(total), h(total), eps(total);
    std::vector<double> xs(static_cast<std::size_t>(total) * static_cast<std::size_t>(o.Dx));
    for (int i = 0; i < N; ++i) {
        Rng gen(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
        InnovationSampler sampler(spec.innovation);
        std::normal_distribution<double> xdist(0.0, 1.0);
        const double omega = spec.garch.omega[i];
        const double intercept = omega * (1.0 - g.persistence());
        for (int t = 0; t < total; ++t) {
            for (int d = 0; d < o.Dx; ++d) xs[static_cast<std::size_t>(t * o.Dx + d)] = xdist(gen);
            eps[t] = sampler(gen);
            double ht = intercept;
            for (int l = 1; l <= o.L; ++l) ht += g.tau[l - 1] * (t - l >= 0 ? u[t - l] * u[t - l] : 0.0);
            for (int k = 1; k <= o.K; ++k) ht += g.nu[k - 1] * (t - k >= 0 ? h[t - k] : omega);
            h[t] = ht;
            u[t] = std::sqrt(ht) * eps[t];
            double yt = spec.arma.mu[i] + u[t];
            for (int d = 0; d < o.Dx; ++d) yt += c.beta[d] * xs[static_cast<std::size_t>(t * o.Dx + d)];
            for (int p = 1; p <= o.P && t - p >= 0; ++p) yt += c.phi[p - 1] * y[t - p];
            for (int q = 1; q <= o.Q && t - q >= 0; ++q) yt += c.psi[q - 1] * u[t - q];
            y[t] = yt;
        }
        for (int t = 0; t < T; ++t) {
            out.panel.y(i, t) = y[off + t];
            out.u(i, t) = u[off + t];
            out.h(i, t) = h[off + t];
            out.eps(i, t) = eps[off + t];
            for (int d = 0; d < o.Dx; ++d) {
                out.panel.x[static_cast<std::size_t>(d)](i, t) =
                    xs[static_cast<std::size_t>((off + t) * o.Dx + d)];
            }
        }
    }
    return out;
}

PanelData simulate(const SimulationSpec& spec, std::uint64_t seed) {
    return simulate_detailed(spec, seed).panel;
}

}  // namespace pagarch
