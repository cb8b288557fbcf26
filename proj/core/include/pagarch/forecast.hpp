#pragma once

// One-step rolling-window forecasts: point forecasts, filtered historical
// simulation (FHS) intervals, RMSE and the conditional coverage test.
//
// Period indices are 0-based. A forecast made at origin o uses periods up to
// and including o and predicts period o + 1.

#include "pagarch/bias_inference.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pagarch {

enum class ForecastMethod { Panel, PanelAnalytic, PanelJackknife, Univariate };

std::string to_string(ForecastMethod m);
ForecastMethod parse_forecast_method(const std::string& name);

enum class ResidualPool { Panel, Unit };

struct PointForecast {
    double y = 0.0;
    double h = 0.0;
};

/// `arma_fit` and `garch_fit` were estimated on the window of `panel` that
/// ends at `origin`; the window length is the number of residual columns.
/// The fitted unit index is `fit_unit` (0 for a single-unit fit of `unit`).
/// x at origin + 1 is part of the information set (regressors enter as their
/// own lags), so it must exist when D_x > 0.
PointForecast point_forecast(const ArmaEstimate& arma_fit, const GarchEstimate& garch_fit,
                             const PanelData& panel, int unit, int origin, int fit_unit = -1);

struct FhsInterval {
    double lower = 0.0;
    double upper = 0.0;
    bool degenerate = false;  // the residual pool has no spread
};

/// Standardized in-window residuals u / sqrt(h): all units (Panel) or one fitted unit.
std::vector<double> standardized_pool(const ArmaEstimate& arma_fit, const GarchEstimate& garch_fit,
                                      ResidualPool pool, int fit_unit);

/// Empirical ((1 - level)/2, (1 + level)/2) quantiles of y + sqrt(h) eps*
/// over `draws` resamples eps* of the pool. Needs at least 50 pooled residuals.
FhsInterval fhs_interval(const PointForecast& forecast, const std::vector<double>& pool, double level,
                         int draws, std::uint64_t seed);

struct LrCc {
    double lr_uc = 0.0;
    double lr_ind = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;
    int n = 0;
    int n1 = 0;
};

/// Christoffersen conditional coverage test of a 0/1 violation sequence
/// against the nominal violation rate; chi-square(2) p-value. Needs n >= 20.
LrCc lr_cc(const std::vector<int>& hits, double violation_rate);

struct ForecastRecord {
    int unit = 0;
    int origin = 0;
    double y_actual = 0.0;
    double y_point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double h_forecast = 0.0;
    bool hit = false;
    bool degenerate = false;
};

struct ForecastOptions {
    double level = 0.95;
    int fhs_draws = 10000;
    ResidualPool pool = ResidualPool::Panel;
    std::uint64_t seed = 0;
    int workers = 1;
    CorrectionOptions correction;  // arma/garch fit settings and bootstrap size
};

/// Forecasts of every unit at one origin from a fit on periods
/// [origin - window + 1, origin]. Only those periods (and x at origin + 1)
/// are read.
std::vector<ForecastRecord> forecast_origin(const PanelData& panel, const ModelOrders& orders, int window,
                                            int origin, ForecastMethod method,
                                            const ForecastOptions& options = {});

struct UnitBacktest {
    int unit = 0;
    std::string label;
    double rmse = 0.0;
    double hit_rate = 0.0;
    std::vector<int> hits;
    LrCc test;
};

struct BacktestSummary {
    ForecastMethod method = ForecastMethod::Panel;
    int window = 0;
    double level = 0.95;
    std::vector<ForecastRecord> records;  // origin-major, then unit
    std::vector<UnitBacktest> units;
    std::vector<int> skipped_origins;
    std::vector<std::string> skip_log;

    double mean_rmse() const;
};

/// Origins window - 1, ..., T - 2. A failed fit skips its origin; more than
/// 20% skipped origins throws NumericalError.
BacktestSummary rolling_backtest(const PanelData& panel, const ModelOrders& orders, int window,
                                 ForecastMethod method, const ForecastOptions& options = {});

}  // namespace pagarch
