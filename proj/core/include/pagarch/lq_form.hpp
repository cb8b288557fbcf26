#pragma once

// Linear-quadratic forms LQ = V'MV + b'V in a block-independent,
// within-block uncorrelated (martingale difference) vector V: exact mean and
// variance, weight-matrix diagnostics and Monte Carlo CLT checks.

#include "pagarch/model.hpp"
#include "pagarch/rng.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace pagarch {

/// Generator of one unit's innovations v_i1..v_iT (mean zero).
struct LQInnovation {
    enum class Kind { Normal, StudentT, ThreePoint, Garch };
    Kind kind = Kind::Normal;
    double scale = 1.0;                      // standard deviation (Normal, StudentT)
    double df = 0.0;                         // StudentT, > 4
    std::array<double, 3> support{-1.0, 0.0, 1.0};
    std::array<double, 3> probs{0.25, 0.5, 0.25};
    GarchCoefficients garch;                 // Garch: v = sqrt(h) eps, eps ~ `eps`
    double omega = 1.0;
    Innovation eps;
    int burn_in = 500;

    static LQInnovation normal(double sd = 1.0);
    static LQInnovation student_t(double df, double sd = 1.0);
    static LQInnovation three_point(std::array<double, 3> support, std::array<double, 3> probs);
    static LQInnovation garch_process(GarchCoefficients coef, double omega, Innovation eps = {});

    /// Throws ValidationError unless the generator has mean zero and the
    /// moments it needs exist.
    void validate() const;
    bool independent() const { return kind != Kind::Garch; }

    /// Draws a path of length T into `out`.
    void draw(Rng& rng, std::span<double> out) const;
};

struct LQProblem {
    int N = 0;
    int T = 0;
    std::map<std::pair<int, int>, Eigen::MatrixXd> blocks;  // absent blocks are zero
    Vector b;                                               // NT, unit-major; empty = 0
    std::vector<LQInnovation> innovation;                   // one per unit, or one shared

    LQProblem() = default;
    LQProblem(int n_units, int n_periods);

    void set_block(int i, int j, Eigen::MatrixXd m);
    /// Block (i, j) or nullptr when it is zero.
    const Eigen::MatrixXd* block(int i, int j) const;
    double b_at(int i, int t) const { return b.size() == 0 ? 0.0 : b[i * T + t]; }
    const LQInnovation& innovation_of(int i) const;

    Eigen::MatrixXd dense() const;
    void validate() const;

    /// Blockwise centering M_ii = I_T - l l'/T, no cross blocks, b = 0.
    static LQProblem centering(int n_units, int n_periods, const LQInnovation& innovation);

    /// V'MV + b'V for a realisation V (unit-major, length NT).
    double evaluate(const Vector& v) const;
};

/// Moments of one unit's innovations. Time arguments are 0-based periods.
/// Missing callables mean the corresponding cross moments are identically zero.
struct UnitMoments {
    double sigma2 = 0.0;  // E v^2
    double pi = 0.0;      // E v^3
    double rho4 = 0.0;    // E v^4
    std::function<double(int, int)> varsigma;        // Cov(v_t^2, v_s^2), s != t
    std::function<double(int, int, int)> vartheta;   // E(v_t^2 v_a v_c), a != c, both != t
    std::function<double(int, int)> varrho;          // E(v_t^3 v_s), s != t
    std::function<double(int, int)> pi_cross;        // E(v_t^2 v_s), s != t
    int truncation_lag = 0;     // lag tables: largest gap carried
    double tail_bound = 0.0;    // lag tables: geometric bound on the dropped sum of |varsigma|
};

struct MomentProfile {
    std::vector<UnitMoments> units;

    const UnitMoments& unit(int i) const { return units.size() == 1 ? units[0] : units[i]; }

    /// Independent innovations with the given marginal moments (shared by all units).
    static MomentProfile iid(double sigma2, double pi, double rho4);
};

/// Exact marginal moments of an independent generator (Normal, StudentT,
/// ThreePoint). Throws for Garch.
UnitMoments independent_moments(const LQInnovation& innovation);

/// Stationary lag-table moments estimated from one long simulated path.
/// varsigma, varrho and pi_cross are carried up to `max_lag`; vartheta up to
/// `max_lag_2d` in both gaps. Forward moments (later index inside the odd
/// power) vanish for a martingale difference sequence and are set to zero.
/// When `odd_moments_vanish` (symmetric innovations driving a GARCH) pi,
/// varrho, pi_cross and vartheta are zero exactly and are not estimated.
UnitMoments estimate_lag_moments(const LQInnovation& innovation, int max_lag, int max_lag_2d,
                                 std::int64_t path_length, std::uint64_t seed,
                                 bool odd_moments_vanish);

/// Exact stationary moments of a GARCH(1,1) generator with symmetric eps:
/// E v^4 = kappa E h^2 and Cov(v_t^2, v_{t-k}^2) = gamma_1 (tau + nu)^{k-1}.
/// Empty for other orders or when E v^4 is infinite.
std::optional<UnitMoments> garch11_moments(const LQInnovation& innovation);

/// Profile for every unit of the problem: exact moments for independent
/// generators and GARCH(1,1); otherwise lag tables truncated at min(T, 200)
/// (30 for vartheta) estimated from a simulated path.
MomentProfile profile_for(const LQProblem& problem, std::uint64_t seed = 0,
                          std::int64_t path_length = 2'000'000);

double lq_mean(const LQProblem& problem, const MomentProfile& profile);
double lq_variance(const LQProblem& problem, const MomentProfile& profile);

struct ConditionThresholds {
    double max_row_sum = 10.0;
    double max_col_sum = 10.0;
    double max_b2 = 100.0;
    double stat_a = 0.1;
    double stat_b = 0.1;
    double stat_c = 0.1;
    int chi = 0;  // lag cut-off for statistic (c); 0 means T / 4
};

struct ConditionReport {
    double max_row_sum = 0.0;  // sup over rows of sum |m|
    double max_col_sum = 0.0;
    double sup_b2 = 0.0;
    double stat_a = 0.0;  // max_i T^{-1} sum_t m_ii,tt^2
    double stat_b = 0.0;  // max_i, t* of T^{-1} sum_t |m_ii,t,t-t* - m_ii,t-1,t-t*-1|
    double stat_c = 0.0;  // max_i T^{-1} sum_{|t-s| >= chi} m_ii,ts^2
    int chi = 0;
    bool row_ok = false, col_ok = false, b_ok = false, a_ok = false, b_stat_ok = false, c_ok = false;
};

ConditionReport check_conditions(const LQProblem& problem, const ConditionThresholds& thresholds = {});

struct CltSummary {
    std::vector<double> standardized;  // (LQ - mu) / sigma per replication, in replication order
    double mu = 0.0;
    double sigma = 0.0;
    double ks_distance = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};

/// Replication r draws from its own substream derived from (seed, r), so a
/// run with more replications extends a shorter one without changing it.
CltSummary clt_montecarlo(const LQProblem& problem, const MomentProfile& profile, int replications,
                          std::uint64_t seed, int workers = 1);

/// Kolmogorov-Smirnov distance of a sample to N(0, 1).
double ks_distance_normal(std::vector<double> sample);

}  // namespace pagarch
