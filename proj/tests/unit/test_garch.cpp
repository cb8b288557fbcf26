#include "doctest.h"
#include "oracles.hpp"

#include "pagarch/arma_ls.hpp"
#include "pagarch/garch_vtqml.hpp"

#include <cmath>

using namespace pagarch;

namespace {

Vector zeta2(double tau, double nu) {
    Vector z(2);
    z << tau, nu;
    return z;
}

}  // namespace

TEST_SUITE("garch") {

TEST_CASE("variance target") {
    Matrix u(2, 3);
    u << 1, -1, 2, 1, 1, 1;
    const Vector w = variance_target(u);
    CHECK(w[0] == doctest::Approx(2.0));
    CHECK(w[1] == doctest::Approx(1.0));
    u.row(1).setZero();
    CHECK_THROWS_AS(variance_target(u), ValidationError);
}

TEST_CASE("log likelihood hand case") {
    Matrix u = Matrix::Ones(1, 2);
    const double L = vt_quasi_loglik(zeta2(0.2, 0.4), 1, 1, Vector::Ones(1), u, 1.0);
    const double expect = -0.5 * ((std::log(0.8) + 1.25) + (std::log(0.92) + 1.0 / 0.92));
    CHECK(L == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("log likelihood matches plain loops") {
    Rng rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix u = oracle::random_panel(rng, 4, 25, 0).y * 1.7;
        const Vector omega = variance_target(u);
        const Vector ch = Vector::LinSpaced(4, 0.5, 2.0);
        std::uniform_real_distribution<double> a(0.0, 0.5);
        const double tau = a(rng), nu = a(rng) * 0.9;
        const double lib = vt_quasi_loglik(zeta2(tau, nu), 1, 1, omega, u, ch);
        CHECK(lib == doctest::Approx(oracle::plain_vt_loglik(u, tau, nu, omega, ch)).epsilon(1e-12));
    }
}

TEST_CASE("constant variance reduction") {
    Rng rng(3);
    const Matrix u = oracle::random_panel(rng, 3, 50, 0).y;
    const Vector w = variance_target(u);
    const double at_hat = vt_quasi_loglik(zeta2(0, 0), 1, 1, w, u, 1.0);
    for (double s : {0.9, 1.1}) CHECK(vt_quasi_loglik(zeta2(0, 0), 1, 1, w * s, u, 1.0) < at_hat);
    const double L1 = vt_quasi_loglik(zeta2(0.2, 0.4), 1, 1, w, u, 1.0);
    const double L2 = vt_quasi_loglik(zeta2(0.2 + 1e-8, 0.4), 1, 1, w, u, 1.0);
    CHECK(std::abs(L1 - L2) <= 1e-4 * std::abs(L1));
}

TEST_CASE("scores match finite differences") {
    const auto sim = oracle::design_panel(6, 80, 4);
    const Matrix& u = sim.u;
    const Vector w = variance_target(u);
    const Vector z = zeta2(0.15, 0.5);
    const Eigen::MatrixXd S = garch_unit_scores(z, 1, 1, w, u, w);
    const Vector g = S.colwise().sum().transpose();
    for (int k = 0; k < 2; ++k) {
        Vector a = z, b = z;
        a[k] += 1e-6;
        b[k] -= 1e-6;
        const double fd = (vt_quasi_loglik(a, 1, 1, w, u, w) - vt_quasi_loglik(b, 1, 1, w, u, w)) / 2e-6;
        CHECK(g[k] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("feasibility set") {
    CHECK(garch_feasible(zeta2(0.2, 0.4), 1, 1));
    CHECK_FALSE(garch_feasible(zeta2(-0.01, 0.4), 1, 1));
    CHECK_FALSE(garch_feasible(zeta2(0.5, 0.5), 1, 1));
    CHECK(garch_feasible(zeta2(0.5, 0.5 - 2e-6), 1, 1));
}

TEST_CASE("fit on the reference design beats the truth and is scale equivariant") {
    const auto sim = oracle::design_panel(20, 200, 31);
    const GarchEstimate fit = fit_garch(sim.u, 1, 1);
    CHECK(fit.converged);
    CHECK(fit.loglik >= vt_quasi_loglik(zeta2(0.2, 0.4), 1, 1, fit.omega, sim.u, fit.c_h) - 1e-8);
    CHECK(fit.zeta.sum() <= 1 - 1e-6);
    CHECK((fit.varpi - fit.omega * (1 - fit.zeta.sum())).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((fit.h - garch_filter(sim.u, fit.coefficients(), fit.omega, fit.c_h)).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(fit.covariance_zeta.rows() == 2);
    CHECK((fit.covariance_zeta.diagonal().array() > 0.0).all());

    const GarchEstimate scaled = fit_garch(sim.u * 3.0, 1, 1);
    CHECK((scaled.zeta - fit.zeta).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((scaled.omega - 9.0 * fit.omega).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("no ARCH gives a fit near zero") {
    Rng rng(8);
    Matrix u = oracle::random_panel(rng, 10, 10000, 0).y;
    for (int i = 0; i < 10; ++i) u.row(i) *= std::sqrt(1.0 + i);
    const GarchEstimate fit = fit_garch(u, 1, 1, {.compute_covariance = false});
    // nu is not identified once tau = 0, so only tau is pinned near zero and the
    // fit must not be significantly better than no ARCH at all
    CHECK(fit.zeta[0] <= 0.02);
    CHECK(2.0 * (fit.loglik - vt_quasi_loglik(zeta2(0, 0), 1, 1, fit.omega, u, fit.c_h)) < 3.84);
    CHECK(std::abs(fit.h.row(3).mean() - fit.omega[3]) < 0.05 * fit.omega[3]);
}

TEST_CASE("fitted variance averages to the target") {
    const auto sim = oracle::design_panel(3, 10000, 6, 500);
    const GarchEstimate fit = fit_garch(sim.u, 1, 1, {.compute_covariance = false});
    for (int i = 0; i < 3; ++i) CHECK(std::abs(fit.h.row(i).mean() / fit.omega[i] - 1.0) < 0.05);
    CHECK(std::abs(fit.zeta[0] - 0.2) < 0.05);
}

}
