#include "pagarch/forecast.hpp"

#include "pagarch/parallel.hpp"
#include "pagarch/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pagarch {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// n log p with 0 log 0 = 0.
double xlogy(double n, double p) { return n == 0.0 ? 0.0 : n * std::log(p); }

double quantile_sorted(const std::vector<double>& s, double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

struct WindowFit {
    ArmaEstimate arma;
    GarchEstimate garch;
};

WindowFit fit_window(const PanelData& data, const ModelOrders& orders, ForecastMethod method,
                     const CorrectionOptions& base) {
    CorrectionOptions co = base;
    co.arma.compute_covariance = false;
    co.garch.compute_covariance = false;
    co.workers = 1;
    WindowFit w;
    switch (method) {
        case ForecastMethod::Panel:
        case ForecastMethod::Univariate:
            w.arma = fit_arma(data, orders, co.arma);
            w.garch = fit_garch(w.arma.residuals, orders.L, orders.K, co.garch);
            break;
        case ForecastMethod::PanelAnalytic:
        case ForecastMethod::PanelJackknife: {
            co.zeta_star_lambda = method == ForecastMethod::PanelAnalytic ? CorrectionMethod::Analytic
                                                                          : CorrectionMethod::Jackknife;
            const GarchCorrection gc = jackknife_garch(data, orders, co);
            w.arma = gc.lambda_correction.estimate;
            w.garch = gc.estimate;
            break;
        }
    }
    return w;
}

}  // namespace

std::string to_string(ForecastMethod m) {
    switch (m) {
        case ForecastMethod::Panel: return "panel";
        case ForecastMethod::PanelAnalytic: return "panel-analytic";
        case ForecastMethod::PanelJackknife: return "panel-jackknife";
        case ForecastMethod::Univariate: return "univariate";
    }
    return "?";
}

ForecastMethod parse_forecast_method(const std::string& name) {
    for (ForecastMethod m : {ForecastMethod::Panel, ForecastMethod::PanelAnalytic, ForecastMethod::PanelJackknife,
                             ForecastMethod::Univariate}) {
        if (to_string(m) == name) return m;
    }
    throw ValidationError("unknown method '" + name +
                          "' (expected panel, panel-analytic, panel-jackknife, univariate)");
}

PointForecast point_forecast(const ArmaEstimate& arma_fit, const GarchEstimate& garch_fit,
                             const PanelData& panel, int unit, int origin, int fit_unit) {
    const int fu = fit_unit < 0 ? unit : fit_unit;
    const int W = static_cast<int>(arma_fit.residuals.cols());
    const int start = origin - W + 1;
    const ModelOrders& o = arma_fit.orders;
    if (unit < 0 || unit >= panel.n_units()) throw ValidationError("forecast unit out of range");
    if (fu < 0 || fu >= arma_fit.residuals.rows()) throw ValidationError("fitted unit out of range");
    if (start < 0 || origin >= panel.n_periods()) throw ValidationError("forecast origin outside the panel");
    if (origin < o.max_lag()) throw ValidationError("forecast origin too early for the model lags");
    if (o.Dx > 0 && origin + 1 >= panel.n_periods()) {
        throw ValidationError("origin " + std::to_string(origin) + " is at the panel edge: no regressors for period " +
                              std::to_string(origin + 1));
    }
    const ArmaCoefficients c = arma_fit.coefficients();
    PointForecast f;
    f.y = arma_fit.mu[fu];
    for (int d = 0; d < o.Dx; ++d) f.y += c.beta[d] * panel.x[static_cast<std::size_t>(d)](unit, origin + 1);
    for (int p = 1; p <= o.P; ++p) {
        const int s = origin + 1 - p;
        if (s >= start) f.y += c.phi[p - 1] * panel.y(unit, s);
    }
    for (int q = 1; q <= o.Q; ++q) {
        const int s = W - q;
        if (s >= 0) f.y += c.psi[q - 1] * arma_fit.residuals(fu, s);
    }

    const GarchCoefficients g = garch_fit.coefficients();
    f.h = garch_fit.omega[fu] * (1.0 - g.persistence());
    for (int l = 1; l <= garch_fit.L; ++l) {
        const int s = W - l;
        if (s >= 0) f.h += g.tau[l - 1] * arma_fit.residuals(fu, s) * arma_fit.residuals(fu, s);
    }
    for (int k = 1; k <= garch_fit.K; ++k) {
        const int s = W - k;
        f.h += g.nu[k - 1] * (s >= 0 ? garch_fit.h(fu, s) : garch_fit.c_h[fu]);
    }
    return f;
}

std::vector<double> standardized_pool(const ArmaEstimate& arma_fit, const GarchEstimate& garch_fit,
                                      ResidualPool pool, int fit_unit) {
    std::vector<double> out;
    const Matrix& u = arma_fit.residuals;
    const int first = pool == ResidualPool::Panel ? 0 : fit_unit;
    const int last = pool == ResidualPool::Panel ? static_cast<int>(u.rows()) : fit_unit + 1;
    for (int i = first; i < last; ++i) {
        for (Eigen::Index t = 0; t < u.cols(); ++t) {
            const double h = garch_fit.h(i, t);
            if (h > 0.0) out.push_back(u(i, t) / std::sqrt(h));
        }
    }
    return out;
}

FhsInterval fhs_interval(const PointForecast& forecast, const std::vector<double>& pool, double level,
                         int draws, std::uint64_t seed) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must lie in (0, 1)");
    if (draws < 2) throw ValidationError("FHS needs at least 2 draws");
    if (pool.size() < 50) {
        throw ValidationError("insufficient residual pool for FHS: " + std::to_string(pool.size()) + " < 50");
    }
    FhsInterval out;
    const auto [mn, mx] = std::minmax_element(pool.begin(), pool.end());
    if (*mn == *mx) {
        out.degenerate = true;
        out.lower = out.upper = forecast.y + std::sqrt(forecast.h) * *mn;
        return out;
    }
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<double> ys(static_cast<std::size_t>(draws));
    const double s = std::sqrt(forecast.h);
    for (auto& y : ys) y = forecast.y + s * pool[pick(rng)];
    std::sort(ys.begin(), ys.end());
    out.lower = quantile_sorted(ys, 0.5 * (1.0 - level));
    out.upper = quantile_sorted(ys, 0.5 * (1.0 + level));
    return out;
}

LrCc lr_cc(const std::vector<int>& hits, double violation_rate) {
    if (hits.size() < 20) throw ValidationError("LR_cc needs at least 20 observations");
    if (!(violation_rate > 0.0 && violation_rate < 1.0)) throw ValidationError("violation rate must lie in (0, 1)");
    LrCc r;
    r.n = static_cast<int>(hits.size());
    double n00 = 0, n01 = 0, n10 = 0, n11 = 0;
    for (std::size_t t = 0; t < hits.size(); ++t) {
        if (hits[t] != 0 && hits[t] != 1) throw ValidationError("hit sequence must be 0/1");
        r.n1 += hits[t];
        if (t == 0) continue;
        const int a = hits[t - 1], b = hits[t];
        (a == 0 ? (b == 0 ? n00 : n01) : (b == 0 ? n10 : n11)) += 1.0;
    }
    const double n1 = r.n1, n0 = r.n - r.n1;
    const double p = n1 / r.n;
    r.lr_uc = -2.0 * (xlogy(n0, 1.0 - violation_rate) + xlogy(n1, violation_rate) - xlogy(n0, 1.0 - p) -
                      xlogy(n1, p));
    const double pi01 = n00 + n01 > 0 ? n01 / (n00 + n01) : 0.0;
    const double pi11 = n10 + n11 > 0 ? n11 / (n10 + n11) : 0.0;
    const double pi = (n01 + n11) / (n00 + n01 + n10 + n11);
    const double l0 = xlogy(n00 + n10, 1.0 - pi) + xlogy(n01 + n11, pi);
    const double l1 = xlogy(n00, 1.0 - pi01) + xlogy(n01, pi01) + xlogy(n10, 1.0 - pi11) + xlogy(n11, pi11);
    r.lr_ind = std::max(0.0, -2.0 * (l0 - l1));
    r.lr_uc = std::max(0.0, r.lr_uc);
    r.statistic = r.lr_uc + r.lr_ind;
    r.p_value = std::exp(-0.5 * r.statistic);  // chi-square(2) survival function
    return r;
}

std::vector<ForecastRecord> forecast_origin(const PanelData& panel, const ModelOrders& orders, int window,
                                            int origin, ForecastMethod method, const ForecastOptions& options) {
    const int T = panel.n_periods();
    if (window < 1 || origin - window + 1 < 0 || origin >= T) throw ValidationError("forecast window outside the panel");
    const PanelData data = panel.slice_periods(origin - window + 1, origin + 1);
    CorrectionOptions co = options.correction;
    co.seed = derive_seed(options.seed, {static_cast<std::uint64_t>(origin), 0xc0ULL});

    const int N = panel.n_units();
    std::vector<ForecastRecord> out(static_cast<std::size_t>(N));
    auto record = [&](int i, const WindowFit& w, int fu, ResidualPool pool) {
        const PointForecast f = point_forecast(w.arma, w.garch, panel, i, origin, fu);
        const FhsInterval iv = fhs_interval(f, standardized_pool(w.arma, w.garch, pool, fu), options.level,
                                            options.fhs_draws,
                                            derive_seed(options.seed, {static_cast<std::uint64_t>(origin),
                                                                       static_cast<std::uint64_t>(i)}));
        ForecastRecord& r = out[static_cast<std::size_t>(i)];
        r.unit = i;
        r.origin = origin;
        r.y_actual = origin + 1 < T ? panel.y(i, origin + 1) : kNaN;
        r.y_point = f.y;
        r.h_forecast = f.h;
        r.lower = iv.lower;
        r.upper = iv.upper;
        r.degenerate = iv.degenerate;
        r.hit = std::isfinite(r.y_actual) && (r.y_actual < iv.lower || r.y_actual > iv.upper);
    };
    if (method == ForecastMethod::Univariate) {
        for (int i = 0; i < N; ++i) record(i, fit_window(data.unit(i), orders, method, co), 0, ResidualPool::Unit);
    } else {
        const WindowFit w = fit_window(data, orders, method, co);
        for (int i = 0; i < N; ++i) record(i, w, i, options.pool);
    }
    return out;
}

double BacktestSummary::mean_rmse() const {
    if (units.empty()) return kNaN;
    double s = 0.0;
    for (const auto& u : units) s += u.rmse;
    return s / static_cast<double>(units.size());
}

BacktestSummary rolling_backtest(const PanelData& panel, const ModelOrders& orders, int window,
                                 ForecastMethod method, const ForecastOptions& options) {
    panel.validate_for(orders);
    const int T = panel.n_periods();
    const int N = panel.n_units();
    if (!(T > window + 1)) throw ValidationError("rolling backtest needs T > window + 1");
    if (window < orders.max_lag() + 2) throw ValidationError("forecast window too short for the model");

    const int first = window - 1;
    const int count = T - 1 - first;
    std::vector<std::vector<ForecastRecord>> by_origin(static_cast<std::size_t>(count));
    std::vector<std::string> errors(static_cast<std::size_t>(count));
    parallel_for(by_origin.size(), options.workers, [&](std::size_t k) {
        const int origin = first + static_cast<int>(k);
        try {
            by_origin[k] = forecast_origin(panel, orders, window, origin, method, options);
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
    });

    BacktestSummary s;
    s.method = method;
    s.window = window;
    s.level = options.level;
    for (int k = 0; k < count; ++k) {
        if (!errors[static_cast<std::size_t>(k)].empty()) {
            s.skipped_origins.push_back(first + k);
            s.skip_log.push_back("origin " + std::to_string(first + k) + ": " + errors[static_cast<std::size_t>(k)]);
            continue;
        }
        for (const auto& r : by_origin[static_cast<std::size_t>(k)]) s.records.push_back(r);
    }
    if (static_cast<double>(s.skipped_origins.size()) > 0.2 * count) {
        std::string msg = "rolling backtest aborted: " + std::to_string(s.skipped_origins.size()) + " of " +
                          std::to_string(count) + " origins failed";
        if (!s.skip_log.empty()) msg += " (first: " + s.skip_log.front() + ")";
        throw NumericalError(msg);
    }

    s.units.resize(static_cast<std::size_t>(N));
    std::vector<double> sse(static_cast<std::size_t>(N), 0.0);
    for (const auto& r : s.records) {
        auto& u = s.units[static_cast<std::size_t>(r.unit)];
        sse[static_cast<std::size_t>(r.unit)] += (r.y_actual - r.y_point) * (r.y_actual - r.y_point);
        u.hits.push_back(r.hit ? 1 : 0);
    }
    for (int i = 0; i < N; ++i) {
        auto& u = s.units[static_cast<std::size_t>(i)];
        u.unit = i;
        u.label = panel.unit_label(i);
        const double n = static_cast<double>(u.hits.size());
        u.rmse = n > 0 ? std::sqrt(sse[static_cast<std::size_t>(i)] / n) : kNaN;
        double h = 0.0;
        for (int x : u.hits) h += x;
        u.hit_rate = n > 0 ? h / n : kNaN;
        if (u.hits.size() >= 20) {
            u.test = lr_cc(u.hits, 1.0 - options.level);
        } else {
            u.test.n = static_cast<int>(u.hits.size());
            u.test.statistic = u.test.p_value = kNaN;
        }
    }
    return s;
}

}  // namespace pagarch
