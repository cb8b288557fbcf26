#include "doctest.h"
#include "oracles.hpp"

#include "pagarch/forecast.hpp"

#include <cmath>
#include <map>

using namespace pagarch;

namespace {

struct HandFit {
    ArmaEstimate arma;
    GarchEstimate garch;
};

// One unit, window W, the last residual set to u_last and everything else 0.
HandFit hand_fit(const ModelOrders& o, const Vector& lambda, double mu, int W, double u_last, double omega,
                 double tau, double nu) {
    HandFit f;
    f.arma.orders = o;
    f.arma.lambda = lambda;
    f.arma.mu = Vector::Constant(1, mu);
    f.arma.residuals = Matrix::Zero(1, W);
    f.arma.residuals(0, W - 1) = u_last;
    f.garch.L = 1;
    f.garch.K = 1;
    f.garch.zeta = Vector(2);
    f.garch.zeta << tau, nu;
    f.garch.omega = Vector::Constant(1, omega);
    f.garch.c_h = f.garch.omega;
    f.garch.h = garch_filter(f.arma.residuals, f.garch.coefficients(), f.garch.omega, omega);
    return f;
}

ForecastOptions quick_options() {
    ForecastOptions o;
    o.fhs_draws = 2000;
    o.seed = 3;
    o.correction.bootstrap_reps = 20;
    return o;
}

}  // namespace

TEST_SUITE("forecast") {

TEST_CASE("point forecast by hand") {
    Vector lam(2);
    lam << 0.5, 0.2;
    const HandFit f = hand_fit({1, 1, 1, 1, 0}, lam, 0.0, 10, 1.0, 1.0, 0.0, 0.0);
    PanelData p;
    p.y = Matrix::Zero(1, 12);
    p.y(0, 9) = 2.0;
    const PointForecast pf = point_forecast(f.arma, f.garch, p, 0, 9);
    CHECK(pf.y == doctest::Approx(1.2));
    CHECK(pf.h == doctest::Approx(1.0));

    const HandFit g = hand_fit({1, 1, 1, 1, 0}, lam, 0.0, 10, 1.0, 2.0, 0.2, 0.4);
    const PointForecast pg = point_forecast(g.arma, g.garch, p, 0, 9);
    CHECK(pg.h == doctest::Approx(2.0 * 0.4 + 0.2 * 1.0 + 0.4 * g.garch.h(0, 9)));
    CHECK_THROWS_AS(point_forecast(g.arma, g.garch, p, 0, 12), ValidationError);
}

TEST_CASE("constant mean model forecasts the fixed effect") {
    PanelData p;
    p.y = Matrix::Constant(2, 30, 4.5);
    p.y.row(1).setConstant(-1.0);
    const ModelOrders o{0, 0, 1, 1, 0};
    const ArmaEstimate a = evaluate_arma(p, o, Vector());
    GarchEstimate g;
    g.L = g.K = 1;
    g.zeta = Vector::Zero(2);
    g.omega = Vector::Ones(2);
    g.c_h = g.omega;
    g.h = Matrix::Ones(2, 30);
    for (int i = 0; i < 2; ++i) CHECK(point_forecast(a, g, p, i, 29).y == p.y(i, 0));
}

TEST_CASE("fhs intervals") {
    const PointForecast f{1.0, 4.0};
    const std::vector<double> zeros(100, 0.0);
    const FhsInterval d = fhs_interval(f, zeros, 0.95, 1000, 1);
    CHECK(d.degenerate);
    CHECK(d.lower == 1.0);
    CHECK(d.upper == 1.0);

    std::vector<double> pool;
    for (int k = 1; k < 100000; ++k) pool.push_back(normal_quantile(k / 100000.0));
    const FhsInterval n = fhs_interval(f, pool, 0.95, 100000, 2);
    CHECK(n.upper - 1.0 == doctest::Approx(1.96 * 2.0).epsilon(0.02));
    CHECK(1.0 - n.lower == doctest::Approx(1.96 * 2.0).epsilon(0.02));
    CHECK_FALSE(n.degenerate);

    const FhsInterval again = fhs_interval(f, pool, 0.95, 100000, 2);
    CHECK(again.lower == n.lower);
    CHECK(again.upper == n.upper);

    double lo = 1.0, hi = 1.0;
    for (double level : {0.5, 0.8, 0.9, 0.95, 0.99}) {
        const FhsInterval i = fhs_interval(f, pool, level, 20000, 9);
        CHECK(i.lower <= lo);
        CHECK(i.upper >= hi);
        lo = i.lower;
        hi = i.upper;
    }
    CHECK_THROWS_AS(fhs_interval(f, std::vector<double>(49, 1.0), 0.95, 100, 1), ValidationError);
}

TEST_CASE("conditional coverage test") {
    std::vector<int> spread(100, 0);
    for (int t : {10, 30, 50, 70, 90}) spread[t] = 1;
    const LrCc a = lr_cc(spread, 0.05);
    CHECK(a.n == 100);
    CHECK(a.n1 == 5);
    CHECK(std::abs(a.lr_uc) < 1e-12);
    // transitions: n00 = 89, n01 = 5, n10 = 5, n11 = 0
    const double pi = 5.0 / 99.0;
    const double l0 = 94 * std::log(1 - pi) + 5 * std::log(pi);
    const double l1 = 89 * std::log(89.0 / 94.0) + 5 * std::log(5.0 / 94.0);
    CHECK(a.lr_ind == doctest::Approx(-2 * (l0 - l1)).epsilon(1e-10));
    CHECK(a.p_value > 0.5);
    CHECK(a.p_value == doctest::Approx(std::exp(-a.statistic / 2)));

    std::vector<int> clustered(100, 0);
    for (int t = 40; t < 45; ++t) clustered[t] = 1;
    const LrCc b = lr_cc(clustered, 0.05);
    CHECK(b.lr_ind > 10.0);
    CHECK(b.p_value < 0.01);

    CHECK_THROWS_AS(lr_cc(std::vector<int>(10, 0), 0.05), ValidationError);
    CHECK_NOTHROW(lr_cc(std::vector<int>(30, 0), 0.05));
}

TEST_CASE("no look ahead") {
    const int T = 80, W = 60, origin = 65;
    const auto sim = oracle::design_panel(8, T, 41);
    const ModelOrders o{1, 1, 1, 1, 1};
    for (ForecastMethod m : {ForecastMethod::PanelJackknife, ForecastMethod::Univariate}) {
        const auto base = forecast_origin(sim.panel, o, W, origin, m, quick_options());
        PanelData mutated = sim.panel;
        mutated.y.rightCols(T - origin - 1).setConstant(1e3);
        mutated.x[0].rightCols(T - origin - 2).setConstant(-7.0);
        const auto after = forecast_origin(mutated, o, W, origin, m, quick_options());
        REQUIRE(base.size() == after.size());
        for (std::size_t k = 0; k < base.size(); ++k) {
            CHECK(base[k].y_point == after[k].y_point);
            CHECK(base[k].h_forecast == after[k].h_forecast);
            CHECK(base[k].lower == after[k].lower);
            CHECK(base[k].upper == after[k].upper);
        }
    }
}

TEST_CASE("panel forecasts do not depend on unit order") {
    const auto sim = oracle::design_panel(6, 56, 43);
    const ModelOrders o{1, 1, 1, 1, 1};
    PanelData labelled = sim.panel;
    labelled.unit_ids = {"a", "b", "c", "d", "e", "f"};
    PanelData rev = labelled;
    for (int i = 0; i < 6; ++i) {
        rev.y.row(i) = labelled.y.row(5 - i);
        rev.x[0].row(i) = labelled.x[0].row(5 - i);
        rev.unit_ids[i] = labelled.unit_ids[5 - i];
    }
    ForecastOptions opt = quick_options();
    const BacktestSummary a = rolling_backtest(labelled, o, 48, ForecastMethod::Panel, opt);
    const BacktestSummary b = rolling_backtest(rev, o, 48, ForecastMethod::Panel, opt);
    std::map<std::string, double> ra;
    for (const auto& u : a.units) ra[u.label] = u.rmse;
    for (const auto& u : b.units) CHECK(u.rmse == doctest::Approx(ra.at(u.label)).epsilon(1e-6));
    CHECK(a.mean_rmse() == doctest::Approx(b.mean_rmse()).epsilon(1e-6));
    CHECK(a.records.size() == 6u * 8u);
}

TEST_CASE("method names") {
    for (ForecastMethod m : {ForecastMethod::Panel, ForecastMethod::PanelAnalytic, ForecastMethod::PanelJackknife,
                             ForecastMethod::Univariate})
        CHECK(parse_forecast_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_forecast_method("arima"), ValidationError);
}

}
