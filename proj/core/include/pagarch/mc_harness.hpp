#pragma once

// Monte Carlo study of the estimators over an (N, T) grid: bias, SD and
// SD/AD per estimator and parameter, rendered as one table per statistic.

#include "pagarch/bias_inference.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace pagarch {

enum class Estimator { LS, Analytic, Jackknife, VTQML, GarchJackknife };

std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& name);

struct ExperimentConfig {
    std::vector<std::pair<int, int>> grid;  // (N, T)
    int replications = 200;
    ModelOrders orders{1, 1, 1, 1, 1};
    ArmaCoefficients arma;
    GarchCoefficients garch;
    double mu_mean = 0.0;
    double mu_sd = 1.0;
    double omega_low = 1.0;
    double omega_high = 3.0;
    Innovation innovation;
    // Simulated pre-sample: y and u start at zero and h at omega_i, then
    // `burn_in` periods are dropped.
    int burn_in = 0;
    std::vector<Estimator> estimators{Estimator::LS, Estimator::Analytic, Estimator::Jackknife,
                                      Estimator::VTQML, Estimator::GarchJackknife};
    std::uint64_t seed = 20240501;
    int workers = 1;
    int bootstrap_reps = 200;
    CorrectionMethod zeta_star_lambda = CorrectionMethod::Jackknife;
    // GARCH estimators are skipped (and suppressed in tables) for T at or below this.
    int min_garch_T = 20;

    /// Reference design: lambda = (3, 0.3, 0.3),
    /// zeta = (0.2, 0.4), mu ~ N(0, 1), omega ~ U(1, 3), x ~ N(0, 1), normal eps,
    /// N in {50, 100}, T in {20, 50, 100, 200, 300}.
    static ExperimentConfig reference_design();

    /// Flat key = value settings (see README); unknown keys throw ValidationError.
    static ExperimentConfig from_key_values(const std::map<std::string, std::string>& kv);

    bool has(Estimator e) const;
    void validate() const;
};

/// One estimator/parameter cell at one grid point.
struct ReportCell {
    std::string parameter;  // e.g. "phi", "phi_A", "tau_J"
    std::string base;       // e.g. "phi"
    Estimator estimator = Estimator::LS;
    double truth = 0.0;
    int n = 0;              // successful replications
    double bias = 0.0;
    double sd = 0.0;
    double mean_ad = 0.0;   // mean of per-replication asymptotic SDs
    int n_ad = 0;
    double sd_ad = 0.0;     // sd / mean_ad; NaN when no AD is available
    double mc_se = 0.0;     // sd / sqrt(n)
    bool available = false;
};

struct GridReport {
    int N = 0;
    int T = 0;
    int replications = 0;
    int failures = 0;
    std::vector<std::string> failure_log;  // "rep <r> seed <s>: <message>"
    bool aborted = false;
    bool garch_suppressed = false;
    std::vector<ReportCell> cells;
    /// Raw estimates, replications x parameters (NaN for failed replications),
    /// columns in the order of `cells`.
    Eigen::MatrixXd estimates;

    const ReportCell* cell(const std::string& parameter) const;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<GridReport> points;
    double seconds = 0.0;

    /// Aligned plain-text Bias, SD and SD/AD tables.
    std::string render_text() const;
    /// One row per grid point and cell.
    std::string render_csv() const;
};

/// Seed of replication r at grid point g.
std::uint64_t replication_seed(std::uint64_t master, std::size_t grid_index, std::size_t replication);

/// The panel (and the fixed effects behind it) of one replication.
struct ReplicationDraw {
    SimulationSpec spec;
    PanelData panel;
};
ReplicationDraw draw_replication(const ExperimentConfig& config, int N, int T, std::uint64_t seed);

ExperimentReport run_experiment(const ExperimentConfig& config);

/// Recomputes se = sd / sqrt(n) for every cell; cells with no successful
/// replication are marked unavailable.
void mc_stderr(ExperimentReport& report);

}  // namespace pagarch
