#include "pagarch/lq_form.hpp"

#include "pagarch/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <random>

namespace pagarch {

LQInnovation LQInnovation::normal(double sd) {
    LQInnovation g;
    g.kind = Kind::Normal;
    g.scale = sd;
    return g;
}

LQInnovation LQInnovation::student_t(double df, double sd) {
    LQInnovation g;
    g.kind = Kind::StudentT;
    g.df = df;
    g.scale = sd;
    return g;
}

LQInnovation LQInnovation::three_point(std::array<double, 3> support, std::array<double, 3> probs) {
    LQInnovation g;
    g.kind = Kind::ThreePoint;
    g.support = support;
    g.probs = probs;
    return g;
}

LQInnovation LQInnovation::garch_process(GarchCoefficients coef, double omega, Innovation eps) {
    LQInnovation g;
    g.kind = Kind::Garch;
    g.garch = std::move(coef);
    g.omega = omega;
    g.eps = eps;
    return g;
}

void LQInnovation::validate() const {
    switch (kind) {
        case Kind::Normal:
            if (!(scale > 0.0)) throw ValidationError("normal innovation needs sd > 0");
            break;
        case Kind::StudentT:
            if (!(scale > 0.0)) throw ValidationError("Student-t innovation needs sd > 0");
            if (!(df > 4.0)) throw ValidationError("Student-t innovation needs df > 4");
            break;
        case Kind::ThreePoint: {
            double total = 0.0, mean = 0.0;
            for (int k = 0; k < 3; ++k) {
                if (!(probs[k] >= 0.0)) throw ValidationError("three-point probabilities must be >= 0");
                total += probs[k];
                mean += probs[k] * support[k];
            }
            if (std::abs(total - 1.0) > 1e-12) throw ValidationError("three-point probabilities must sum to 1");
            if (std::abs(mean) > 1e-12) throw ValidationError("three-point innovation must have mean zero");
            break;
        }
        case Kind::Garch: {
            GarchParams p{Vector::Constant(1, omega), garch};
            p.validate();
            eps.validate();
            if (burn_in < 0) throw ValidationError("burn_in must be >= 0");
            break;
        }
    }
}

void LQInnovation::draw(Rng& rng, std::span<double> out) const {
    const int T = static_cast<int>(out.size());
    switch (kind) {
        case Kind::Normal: {
            std::normal_distribution<double> d(0.0, scale);
            for (int t = 0; t < T; ++t) out[t] = d(rng);
            return;
        }
        case Kind::StudentT: {
            InnovationSampler s(Innovation::student_t(df));
            for (int t = 0; t < T; ++t) out[t] = scale * s(rng);
            return;
        }
        case Kind::ThreePoint: {
            std::uniform_real_distribution<double> d(0.0, 1.0);
            for (int t = 0; t < T; ++t) {
                const double r = d(rng);
                out[t] = r < probs[0] ? support[0] : (r < probs[0] + probs[1] ? support[1] : support[2]);
            }
            return;
        }
        case Kind::Garch: {
            const int L = static_cast<int>(garch.tau.size());
            const int K = static_cast<int>(garch.nu.size());
            const int total = burn_in + T;
            std::vector<double> u2(static_cast<std::size_t>(total)), h(static_cast<std::size_t>(total));
            InnovationSampler s(eps);
            const double intercept = omega * (1.0 - garch.persistence());
            for (int t = 0; t < total; ++t) {
                double acc = intercept;
                for (int l = 1; l <= L && l <= t; ++l) acc += garch.tau[l - 1] * u2[t - l];
                for (int k = 1; k <= K; ++k) acc += garch.nu[k - 1] * (k <= t ? h[t - k] : omega);
                h[t] = acc;
                const double u = std::sqrt(acc) * s(rng);
                u2[t] = u * u;
                if (t >= burn_in) out[t - burn_in] = u;
            }
            return;
        }
    }
}

LQProblem::LQProblem(int n_units, int n_periods) : N(n_units), T(n_periods) {}

void LQProblem::set_block(int i, int j, Eigen::MatrixXd m) {
    if (i < 0 || j < 0 || i >= N || j >= N) throw ValidationError("block index out of range");
    if (m.rows() != T || m.cols() != T) throw ValidationError("block must be T x T");
    blocks[{i, j}] = std::move(m);
}

const Eigen::MatrixXd* LQProblem::block(int i, int j) const {
    const auto it = blocks.find({i, j});
    return it == blocks.end() ? nullptr : &it->second;
}

const LQInnovation& LQProblem::innovation_of(int i) const {
    if (innovation.empty()) throw ValidationError("LQ problem has no innovation spec");
    return innovation.size() == 1 ? innovation[0] : innovation[static_cast<std::size_t>(i)];
}

Eigen::MatrixXd LQProblem::dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N) * T, static_cast<Eigen::Index>(N) * T);
    for (const auto& [ij, blk] : blocks) m.block(ij.first * T, ij.second * T, T, T) = blk;
    return m;
}

void LQProblem::validate() const {
    if (N < 1 || T < 1) throw ValidationError("LQ problem needs N, T >= 1");
    for (const auto& [ij, blk] : blocks) {
        if (blk.rows() != T || blk.cols() != T) throw ValidationError("LQ block has the wrong size");
        if (!blk.allFinite()) throw ValidationError("LQ block has non-finite entries");
    }
    if (b.size() != 0 && b.size() != static_cast<Eigen::Index>(N) * T) {
        throw ValidationError("b must have length NT");
    }
    if (innovation.size() != 1 && innovation.size() != static_cast<std::size_t>(N)) {
        throw ValidationError("innovation spec must be given once or per unit");
    }
    for (const auto& g : innovation) g.validate();
}

LQProblem LQProblem::centering(int n_units, int n_periods, const LQInnovation& innovation) {
    LQProblem p(n_units, n_periods);
    const Eigen::MatrixXd c = Eigen::MatrixXd::Identity(n_periods, n_periods) -
                              Eigen::MatrixXd::Constant(n_periods, n_periods, 1.0 / n_periods);
    for (int i = 0; i < n_units; ++i) p.set_block(i, i, c);
    p.innovation = {innovation};
    return p;
}

double LQProblem::evaluate(const Vector& v) const {
    double q = 0.0;
    for (const auto& [ij, blk] : blocks) {
        q += v.segment(ij.first * T, T).dot(blk * v.segment(ij.second * T, T));
    }
    if (b.size() != 0) q += b.dot(v);
    return q;
}

MomentProfile MomentProfile::iid(double sigma2, double pi, double rho4) {
    MomentProfile p;
    UnitMoments u;
    u.sigma2 = sigma2;
    u.pi = pi;
    u.rho4 = rho4;
    p.units.push_back(u);
    return p;
}

UnitMoments independent_moments(const LQInnovation& g) {
    g.validate();
    UnitMoments m;
    switch (g.kind) {
        case LQInnovation::Kind::Normal: {
            const double s2 = g.scale * g.scale;
            m.sigma2 = s2;
            m.rho4 = 3.0 * s2 * s2;
            break;
        }
        case LQInnovation::Kind::StudentT: {
            const double s2 = g.scale * g.scale;
            m.sigma2 = s2;
            m.rho4 = 3.0 * s2 * s2 * (g.df - 2.0) / (g.df - 4.0);
            break;
        }
        case LQInnovation::Kind::ThreePoint:
            for (int k = 0; k < 3; ++k) {
                const double x = g.support[k];
                m.sigma2 += g.probs[k] * x * x;
                m.pi += g.probs[k] * x * x * x;
                m.rho4 += g.probs[k] * x * x * x * x;
            }
            break;
        case LQInnovation::Kind::Garch:
            throw ValidationError("GARCH innovations are not independent; use estimate_lag_moments");
    }
    return m;
}

UnitMoments estimate_lag_moments(const LQInnovation& g, int max_lag, int max_lag_2d,
                                 std::int64_t path_length, std::uint64_t seed,
                                 bool odd_moments_vanish) {
    g.validate();
    if (max_lag < 1 || max_lag_2d < 0) throw ValidationError("lag truncation must be positive");
    if (path_length < 10 * static_cast<std::int64_t>(max_lag)) {
        throw ValidationError("simulated path too short for the requested lags");
    }
    std::vector<double> v(static_cast<std::size_t>(path_length));
    Rng rng(derive_seed(seed, {0x1a9}));
    g.draw(rng, v);
    const std::size_t n = v.size();

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double x2 = x * x;
        m2 += x2;
        m3 += x2 * x;
        m4 += x2 * x2;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);

    UnitMoments out;
    // Variance targeting makes E v^2 = omega exact for a GARCH generator.
    out.sigma2 = g.kind == LQInnovation::Kind::Garch ? g.omega : m2;
    out.pi = odd_moments_vanish ? 0.0 : m3;
    out.rho4 = m4;
    out.truncation_lag = max_lag;

    auto lag_mean = [&](int k, auto term) {
        double acc = 0.0;
        for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t) acc += term(t, t - k);
        return acc / static_cast<double>(n - k);
    };

    auto vs = std::make_shared<std::vector<double>>(max_lag + 1, 0.0);
    for (int k = 1; k <= max_lag; ++k) {
        (*vs)[k] = lag_mean(k, [&](std::size_t t, std::size_t s) { return v[t] * v[t] * v[s] * v[s]; }) -
                   out.sigma2 * out.sigma2;
    }
    out.varsigma = [vs, max_lag](int t, int s) {
        const int k = std::abs(t - s);
        return k >= 1 && k <= max_lag ? (*vs)[k] : 0.0;
    };
    const double last = std::abs((*vs)[max_lag]);
    const double prev = max_lag >= 2 ? std::abs((*vs)[max_lag - 1]) : 0.0;
    if (last == 0.0) {
        out.tail_bound = 0.0;
    } else if (prev > 0.0 && last < prev) {
        const double r = last / prev;
        out.tail_bound = 2.0 * last * r / (1.0 - r);
    } else {
        out.tail_bound = std::numeric_limits<double>::infinity();
    }

    if (odd_moments_vanish) return out;

    auto vr = std::make_shared<std::vector<double>>(max_lag + 1, 0.0);
    auto pc = std::make_shared<std::vector<double>>(max_lag + 1, 0.0);
    for (int k = 1; k <= max_lag; ++k) {
        (*vr)[k] = lag_mean(k, [&](std::size_t t, std::size_t s) { return v[t] * v[t] * v[t] * v[s]; });
        (*pc)[k] = lag_mean(k, [&](std::size_t t, std::size_t s) { return v[t] * v[t] * v[s]; });
    }
    out.varrho = [vr, max_lag](int t, int s) {
        const int k = t - s;
        return k >= 1 && k <= max_lag ? (*vr)[k] : 0.0;
    };
    out.pi_cross = [pc, max_lag](int t, int s) {
        const int k = t - s;
        return k >= 1 && k <= max_lag ? (*pc)[k] : 0.0;
    };

    const int D = max_lag_2d;
    if (D >= 2) {
        auto th = std::make_shared<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(D + 1, D + 1));
        for (int a = 1; a <= D; ++a) {
            for (int c = a + 1; c <= D; ++c) {
                double acc = 0.0;
                for (std::size_t t = static_cast<std::size_t>(c); t < n; ++t) acc += v[t] * v[t] * v[t - a] * v[t - c];
                (*th)(a, c) = (*th)(c, a) = acc / static_cast<double>(n - c);
            }
        }
        out.vartheta = [th, D](int t, int a, int c) {
            const int ga = t - a, gc = t - c;
            return ga >= 1 && gc >= 1 && ga <= D && gc <= D ? (*th)(ga, gc) : 0.0;
        };
    }
    return out;
}

std::optional<UnitMoments> garch11_moments(const LQInnovation& g) {
    g.validate();
    if (g.kind != LQInnovation::Kind::Garch || g.garch.tau.size() != 1 || g.garch.nu.size() != 1) return std::nullopt;
    const double tau = g.garch.tau[0], nu = g.garch.nu[0], s = tau + nu, w = g.omega;
    const double kappa = g.eps.kind == Innovation::Kind::Normal ? 3.0 : 3.0 * (g.eps.df - 2.0) / (g.eps.df - 4.0);
    const double denom = 1.0 - kappa * tau * tau - 2.0 * tau * nu - nu * nu;
    if (!(denom > 0.0)) return std::nullopt;
    const double c = w * (1.0 - s);
    const double eh2 = (c * c + 2.0 * c * w * s) / denom;
    UnitMoments out;
    out.sigma2 = w;
    out.rho4 = kappa * eh2;
    const double gamma1 = tau * (out.rho4 - w * w) + nu * (eh2 - w * w);
    out.varsigma = [gamma1, s](int t, int u) {
        const int k = std::abs(t - u);
        return k == 0 ? 0.0 : gamma1 * std::pow(s, k - 1);
    };
    out.truncation_lag = std::numeric_limits<int>::max();
    return out;
}

MomentProfile profile_for(const LQProblem& problem, std::uint64_t seed, std::int64_t path_length) {
    problem.validate();
    MomentProfile p;
    for (std::size_t k = 0; k < problem.innovation.size(); ++k) {
        const LQInnovation& g = problem.innovation[k];
        if (g.independent()) {
            p.units.push_back(independent_moments(g));
        } else if (auto exact = garch11_moments(g)) {
            p.units.push_back(std::move(*exact));
        } else {
            p.units.push_back(estimate_lag_moments(g, std::min(problem.T, 200), std::min(problem.T, 30),
                                                   path_length, derive_seed(seed, {k}), true));
        }
    }
    return p;
}

double lq_mean(const LQProblem& problem, const MomentProfile& profile) {
    double mu = 0.0;
    for (int i = 0; i < problem.N; ++i) {
        if (const auto* m = problem.block(i, i)) mu += profile.unit(i).sigma2 * m->trace();
    }
    return mu;
}

double lq_variance(const LQProblem& problem, const MomentProfile& profile) {
    const int T = problem.T;
    double var = 0.0;
    for (int i = 0; i < problem.N; ++i) {
        const UnitMoments& mo = profile.unit(i);
        const double s2 = mo.sigma2;
        double bb = 0.0;
        for (int t = 0; t < T; ++t) bb += problem.b_at(i, t) * problem.b_at(i, t);
        var += s2 * bb;

        const Eigen::MatrixXd* mp = problem.block(i, i);
        if (mp == nullptr) {
            // Only the linear part; cross moments pi_cross need m_tt or m_ts.
            continue;
        }
        const Eigen::MatrixXd& m = *mp;
        for (int t = 0; t < T; ++t) {
            var += (mo.rho4 - 3.0 * s2 * s2) * m(t, t) * m(t, t) + 2.0 * mo.pi * problem.b_at(i, t) * m(t, t);
        }
        if (mo.varsigma) {
            for (int t = 0; t < T; ++t) {
                for (int s = 0; s < T; ++s) {
                    if (s == t) continue;
                    var += (m(t, t) * m(s, s) + m(t, s) * m(t, s) + m(t, s) * m(s, t)) * mo.varsigma(t, s);
                }
            }
        }
        if (mo.varrho) {
            for (int t = 0; t < T; ++t) {
                for (int s = 0; s < T; ++s) {
                    if (s != t) var += 2.0 * m(t, t) * (m(t, s) + m(s, t)) * mo.varrho(t, s);
                }
            }
        }
        if (mo.pi_cross) {
            for (int t = 0; t < T; ++t) {
                for (int s = 0; s < T; ++s) {
                    if (s == t) continue;
                    var += 2.0 *
                           (m(t, t) * problem.b_at(i, s) + (m(t, s) + m(s, t)) * problem.b_at(i, t)) *
                           mo.pi_cross(t, s);
                }
            }
        }
        if (mo.vartheta) {
            // Only the m_tt m_ac product appears twice among the orderings of
            // (t, t, a, c); the other four products appear once each.
            for (int t = 0; t < T; ++t) {
                for (int a = 0; a < T; ++a) {
                    if (a == t) continue;
                    for (int c = 0; c < T; ++c) {
                        if (c == t || c == a) continue;
                        const double th = mo.vartheta(t, a, c);
                        if (th == 0.0) continue;
                        var += th * (2.0 * m(t, t) * m(a, c) + m(t, a) * m(t, c) + m(t, a) * m(c, t) +
                                     m(a, t) * m(t, c) + m(a, t) * m(c, t));
                    }
                }
            }
        }
    }
    // sigma_i^2 sigma_j^2 [tr(M_ij M_ij') + tr(M_ij M_ji)], including i = j.
    for (const auto& [ij, blk] : problem.blocks) {
        const auto [i, j] = ij;
        const double w = profile.unit(i).sigma2 * profile.unit(j).sigma2;
        double term = blk.squaredNorm();
        if (const auto* other = problem.block(j, i)) term += blk.cwiseProduct(other->transpose()).sum();
        var += w * term;
    }
    return var;
}

ConditionReport check_conditions(const LQProblem& problem, const ConditionThresholds& th) {
    problem.validate();
    const int N = problem.N, T = problem.T;
    ConditionReport r;
    r.chi = th.chi > 0 ? th.chi : std::max(1, T / 4);
    std::vector<double> row(static_cast<std::size_t>(N) * T, 0.0), col(static_cast<std::size_t>(N) * T, 0.0);
    for (const auto& [ij, blk] : problem.blocks) {
        const auto [i, j] = ij;
        for (int t = 0; t < T; ++t) {
            for (int s = 0; s < T; ++s) {
                const double a = std::abs(blk(t, s));
                row[static_cast<std::size_t>(i) * T + t] += a;
                col[static_cast<std::size_t>(j) * T + s] += a;
            }
        }
    }
    r.max_row_sum = *std::max_element(row.begin(), row.end());
    r.max_col_sum = *std::max_element(col.begin(), col.end());
    for (int i = 0; i < N; ++i) {
        for (int t = 0; t < T; ++t) r.sup_b2 = std::max(r.sup_b2, problem.b_at(i, t) * problem.b_at(i, t));
    }
    for (int i = 0; i < N; ++i) {
        const Eigen::MatrixXd* mp = problem.block(i, i);
        if (mp == nullptr) continue;
        const Eigen::MatrixXd& m = *mp;
        r.stat_a = std::max(r.stat_a, m.diagonal().squaredNorm() / T);
        for (int lag = 1; lag < T - 1; ++lag) {
            double acc = 0.0;
            for (int t = lag + 1; t < T; ++t) acc += std::abs(m(t, t - lag) - m(t - 1, t - lag - 1));
            r.stat_b = std::max(r.stat_b, acc / T);
        }
        double far = 0.0;
        for (int t = 0; t < T; ++t) {
            for (int s = 0; s < T; ++s) {
                if (std::abs(t - s) >= r.chi) far += m(t, s) * m(t, s);
            }
        }
        r.stat_c = std::max(r.stat_c, far / T);
    }
    r.row_ok = r.max_row_sum <= th.max_row_sum;
    r.col_ok = r.max_col_sum <= th.max_col_sum;
    r.b_ok = r.sup_b2 <= th.max_b2;
    r.a_ok = r.stat_a <= th.stat_a;
    r.b_stat_ok = r.stat_b <= th.stat_b;
    r.c_ok = r.stat_c <= th.stat_c;
    return r;
}

double ks_distance_normal(std::vector<double> x) {
    if (x.empty()) return 0.0;
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double cdf = 0.5 * std::erfc(-x[k] / std::sqrt(2.0));
        d = std::max({d, (k + 1) / n - cdf, cdf - k / n});
    }
    return d;
}

CltSummary clt_montecarlo(const LQProblem& problem, const MomentProfile& profile, int replications,
                          std::uint64_t seed, int workers) {
    problem.validate();
    if (replications < 1000) throw ValidationError("clt_montecarlo needs at least 1000 replications");
    CltSummary out;
    out.mu = lq_mean(problem, profile);
    const double var = lq_variance(problem, profile);
    if (!(var > 0.0)) throw NumericalError("LQ variance is not positive");
    out.sigma = std::sqrt(var);
    out.standardized.assign(static_cast<std::size_t>(replications), 0.0);
    const int T = problem.T;
    parallel_for(static_cast<std::size_t>(replications), workers, [&](std::size_t r) {
        Rng rng(derive_seed(seed, {r}));
        Vector v(static_cast<Eigen::Index>(problem.N) * T);
        for (int i = 0; i < problem.N; ++i) {
            problem.innovation_of(i).draw(rng, std::span<double>(v.data() + static_cast<std::ptrdiff_t>(i) * T, T));
        }
        out.standardized[r] = (problem.evaluate(v) - out.mu) / out.sigma;
    });
    const double n = replications;
    double mean = 0.0;
    for (double z : out.standardized) mean += z;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double z : out.standardized) {
        const double d = z - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    out.mean = mean;
    out.variance = m2 / (n - 1.0);
    m2 /= n;
    m3 /= n;
    m4 /= n;
    out.skewness = m3 / std::pow(m2, 1.5);
    out.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    out.ks_distance = ks_distance_normal(out.standardized);
    return out;
}

}  // namespace pagarch
