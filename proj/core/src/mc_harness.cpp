#include "pagarch/mc_harness.hpp"

#include "pagarch/parallel.hpp"
#include "pagarch/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

namespace pagarch {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, const std::string& seps) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (seps.find(c) != std::string::npos) {
            if (!trim(cur).empty()) out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "': not a number: '" + v + "'");
    }
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "': not an integer: '" + v + "'");
    }
}

Vector to_vector(const std::string& key, const std::string& v) {
    const auto parts = split(v, ", ");
    Vector out(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t k = 0; k < parts.size(); ++k) out[static_cast<Eigen::Index>(k)] = to_double(key, parts[k]);
    return out;
}

std::string indexed(const std::string& name, int k, int count) {
    return count == 1 ? name : name + std::to_string(k + 1);
}

std::vector<std::string> lambda_names(const ModelOrders& o) {
    std::vector<std::string> n;
    for (int k = 0; k < o.Dx; ++k) n.push_back(indexed("beta", k, o.Dx));
    for (int k = 0; k < o.P; ++k) n.push_back(indexed("phi", k, o.P));
    for (int k = 0; k < o.Q; ++k) n.push_back(indexed("psi", k, o.Q));
    return n;
}

std::vector<std::string> zeta_names(const ModelOrders& o) {
    std::vector<std::string> n;
    for (int k = 0; k < o.L; ++k) n.push_back(indexed("tau", k, o.L));
    for (int k = 0; k < o.K; ++k) n.push_back(indexed("nu", k, o.K));
    return n;
}

struct Column {
    std::string parameter;
    std::string base;
    Estimator estimator;
    int index;  // into lambda or zeta
    double truth;
};

std::vector<Column> columns_for(const ExperimentConfig& c, bool with_garch) {
    std::vector<Column> cols;
    const Vector lambda = c.arma.pack();
    const Vector zeta = c.garch.pack();
    const auto ln = lambda_names(c.orders);
    for (int k = 0; k < static_cast<int>(ln.size()); ++k) {
        if (c.has(Estimator::LS)) cols.push_back({ln[k], ln[k], Estimator::LS, k, lambda[k]});
        if (c.has(Estimator::Analytic)) cols.push_back({ln[k] + "_A", ln[k], Estimator::Analytic, k, lambda[k]});
        if (c.has(Estimator::Jackknife)) cols.push_back({ln[k] + "_J", ln[k], Estimator::Jackknife, k, lambda[k]});
    }
    if (!with_garch) return cols;
    const auto zn = zeta_names(c.orders);
    for (int k = 0; k < static_cast<int>(zn.size()); ++k) {
        if (c.has(Estimator::VTQML)) cols.push_back({zn[k], zn[k], Estimator::VTQML, k, zeta[k]});
        if (c.has(Estimator::GarchJackknife)) {
            cols.push_back({zn[k] + "_J", zn[k], Estimator::GarchJackknife, k, zeta[k]});
        }
    }
    return cols;
}

Vector ad_of(const Eigen::MatrixXd& cov, Eigen::Index n) {
    if (cov.rows() != n) return Vector::Constant(n, kNaN);
    return cov.diagonal().cwiseMax(0.0).cwiseSqrt();
}

Vector ad_or_nan(const auto& make, Eigen::Index n) {
    try {
        return ad_of(make(), n);
    } catch (const NumericalError&) {
        return Vector::Constant(n, kNaN);
    }
}

struct RepResult {
    bool ok = false;
    std::string message;
    std::map<Estimator, Vector> est;
    std::map<Estimator, Vector> ad;
};

RepResult run_replication(const ExperimentConfig& c, int N, int T, bool with_garch, std::uint64_t seed) {
    RepResult r;
    try {
        const ReplicationDraw d = draw_replication(c, N, T, seed);
        const PanelData& panel = d.panel;
        const auto nl = static_cast<Eigen::Index>(c.orders.n_lambda());
        const auto nz = static_cast<Eigen::Index>(c.orders.n_zeta());

        CorrectionOptions co;
        co.bootstrap_reps = c.bootstrap_reps;
        co.seed = derive_seed(seed, {3});
        co.workers = 1;
        co.zeta_star_lambda = c.zeta_star_lambda;
        co.garch.compute_covariance = false;

        ArmaFitOptions ao;
        ao.compute_covariance = true;
        const ArmaEstimate fit = fit_arma(panel, c.orders, ao);
        const Vector lambda_ad = ad_of(fit.covariance_lambda, nl);

        if (c.has(Estimator::LS)) {
            r.est[Estimator::LS] = fit.lambda;
            r.ad[Estimator::LS] = lambda_ad;
        }
        if (c.has(Estimator::Analytic)) {
            r.est[Estimator::Analytic] = analytic_correct_arma(panel, fit, co).lambda_corrected;
            r.ad[Estimator::Analytic] = lambda_ad;
        }
        std::optional<GarchCorrection> gj;
        if (with_garch && c.has(Estimator::GarchJackknife)) gj = jackknife_garch(panel, c.orders, co, &fit);
        if (c.has(Estimator::Jackknife)) {
            r.est[Estimator::Jackknife] = gj && c.zeta_star_lambda == CorrectionMethod::Jackknife
                                              ? gj->lambda_star
                                              : jackknife_arma(panel, c.orders, co, &fit).lambda_corrected;
            r.ad[Estimator::Jackknife] = lambda_ad;
        }
        if (with_garch && c.has(Estimator::VTQML)) {
            const GarchEstimate g = fit_garch(fit.residuals, c.orders.L, c.orders.K, co.garch);
            r.est[Estimator::VTQML] = g.zeta;
            r.ad[Estimator::VTQML] = ad_or_nan([&] { return covariance_zeta(panel, fit, g).covariance(); }, nz);
        }
        if (gj) {
            r.est[Estimator::GarchJackknife] = gj->zeta_corrected;
            r.ad[Estimator::GarchJackknife] = ad_or_nan(
                [&] { return covariance_zeta(panel, gj->lambda_correction.estimate, gj->estimate).covariance(); },
                nz);
        }
        r.ok = true;
    } catch (const std::exception& e) {
        r.ok = false;
        r.message = e.what();
    }
    return r;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::LS: return "ls";
        case Estimator::Analytic: return "analytic";
        case Estimator::Jackknife: return "jackknife";
        case Estimator::VTQML: return "vtqml";
        case Estimator::GarchJackknife: return "garch-jackknife";
    }
    return "?";
}

Estimator parse_estimator(const std::string& name) {
    for (Estimator e : {Estimator::LS, Estimator::Analytic, Estimator::Jackknife, Estimator::VTQML,
                        Estimator::GarchJackknife}) {
        if (to_string(e) == name) return e;
    }
    throw ValidationError("unknown estimator '" + name +
                          "' (expected ls, analytic, jackknife, vtqml, garch-jackknife)");
}

ExperimentConfig ExperimentConfig::reference_design() {
    ExperimentConfig c;
    for (int n : {50, 100}) {
        for (int t : {20, 50, 100, 200, 300}) c.grid.emplace_back(n, t);
    }
    c.replications = 1000;
    c.arma.beta = Vector::Constant(1, 3.0);
    c.arma.phi = Vector::Constant(1, 0.3);
    c.arma.psi = Vector::Constant(1, 0.3);
    c.garch.tau = Vector::Constant(1, 0.2);
    c.garch.nu = Vector::Constant(1, 0.4);
    return c;
}

ExperimentConfig ExperimentConfig::from_key_values(const std::map<std::string, std::string>& kv) {
    ExperimentConfig c = reference_design();
    for (const auto& [key, raw] : kv) {
        const std::string v = trim(raw);
        if (key == "grid") {
            c.grid.clear();
            for (const auto& cell : split(v, ",; ")) {
                const auto nt = split(cell, "xX");
                if (nt.size() != 2) throw ValidationError("grid entry '" + cell + "' is not NxT");
                c.grid.emplace_back(static_cast<int>(to_int(key, nt[0])), static_cast<int>(to_int(key, nt[1])));
            }
        } else if (key == "reps" || key == "replications") {
            c.replications = static_cast<int>(to_int(key, v));
        } else if (key == "orders") {
            const auto parts = split(v, ", ");
            if (parts.size() != 4) throw ValidationError("orders must be P,Q,L,K");
            c.orders.P = static_cast<int>(to_int(key, parts[0]));
            c.orders.Q = static_cast<int>(to_int(key, parts[1]));
            c.orders.L = static_cast<int>(to_int(key, parts[2]));
            c.orders.K = static_cast<int>(to_int(key, parts[3]));
        } else if (key == "beta") {
            c.arma.beta = to_vector(key, v);
        } else if (key == "phi") {
            c.arma.phi = to_vector(key, v);
        } else if (key == "psi") {
            c.arma.psi = to_vector(key, v);
        } else if (key == "tau") {
            c.garch.tau = to_vector(key, v);
        } else if (key == "nu") {
            c.garch.nu = to_vector(key, v);
        } else if (key == "mu_mean") {
            c.mu_mean = to_double(key, v);
        } else if (key == "mu_sd") {
            c.mu_sd = to_double(key, v);
        } else if (key == "omega_low") {
            c.omega_low = to_double(key, v);
        } else if (key == "omega_high") {
            c.omega_high = to_double(key, v);
        } else if (key == "innovation") {
            if (v == "normal") {
                c.innovation = Innovation::normal();
            } else if (v.rfind("t", 0) == 0) {
                c.innovation = Innovation::student_t(to_double(key, v.substr(v.find_first_of("0123456789."))));
            } else {
                throw ValidationError("innovation must be 'normal' or 't<df>'");
            }
        } else if (key == "burn_in") {
            c.burn_in = static_cast<int>(to_int(key, v));
        } else if (key == "estimators") {
            c.estimators.clear();
            for (const auto& e : split(v, ", ")) c.estimators.push_back(parse_estimator(e));
        } else if (key == "seed") {
            c.seed = static_cast<std::uint64_t>(to_int(key, v));
        } else if (key == "threads") {
            c.workers = static_cast<int>(to_int(key, v));
        } else if (key == "bootstrap_reps") {
            c.bootstrap_reps = static_cast<int>(to_int(key, v));
        } else if (key == "zeta_star_lambda") {
            if (v == "jackknife") c.zeta_star_lambda = CorrectionMethod::Jackknife;
            else if (v == "analytic") c.zeta_star_lambda = CorrectionMethod::Analytic;
            else throw ValidationError("zeta_star_lambda must be 'jackknife' or 'analytic'");
        } else if (key == "min_garch_T") {
            c.min_garch_T = static_cast<int>(to_int(key, v));
        } else {
            throw ValidationError("unknown montecarlo config key '" + key + "'");
        }
    }
    c.orders.Dx = static_cast<int>(c.arma.beta.size());
    c.validate();
    return c;
}

bool ExperimentConfig::has(Estimator e) const {
    return std::find(estimators.begin(), estimators.end(), e) != estimators.end();
}

void ExperimentConfig::validate() const {
    orders.validate();
    if (replications < 50) throw ValidationError("replications must be >= 50");
    if (grid.empty()) throw ValidationError("experiment grid is empty");
    if (estimators.empty()) throw ValidationError("no estimators requested");
    if (arma.beta.size() != orders.Dx || arma.phi.size() != orders.P || arma.psi.size() != orders.Q) {
        throw ValidationError("DGP mean coefficients do not match the orders");
    }
    if (garch.tau.size() != orders.L || garch.nu.size() != orders.K) {
        throw ValidationError("DGP GARCH coefficients do not match the orders");
    }
    const ArmaValidity av = validate_arma(arma.phi, arma.psi);
    if (!av.valid) throw ValidationError("DGP: " + av.reason);
    GarchParams{Vector::Constant(1, omega_low), garch}.validate();
    if (!(omega_low > 0.0) || !(omega_high >= omega_low)) throw ValidationError("need 0 < omega_low <= omega_high");
    if (!(mu_sd >= 0.0)) throw ValidationError("mu_sd must be >= 0");
    if (burn_in < 0) throw ValidationError("burn_in must be >= 0");
    if (bootstrap_reps < 2) throw ValidationError("bootstrap_reps must be >= 2");
    innovation.validate();
    const int min_T = has(Estimator::Jackknife) || has(Estimator::GarchJackknife)
                          ? 2 * (orders.P + orders.Q + 5)
                          : orders.max_lag() + 2;
    for (const auto& [n, t] : grid) {
        if (n < 1) throw ValidationError("grid: N must be >= 1");
        if (t < min_T) throw ValidationError("grid: T = " + std::to_string(t) + " is below " + std::to_string(min_T));
    }
}

const ReportCell* GridReport::cell(const std::string& parameter) const {
    for (const auto& c : cells) {
        if (c.parameter == parameter) return &c;
    }
    return nullptr;
}

std::uint64_t replication_seed(std::uint64_t master, std::size_t grid_index, std::size_t replication) {
    return derive_seed(master, {grid_index, replication});
}

ReplicationDraw draw_replication(const ExperimentConfig& c, int N, int T, std::uint64_t seed) {
    ReplicationDraw d;
    d.spec.orders = c.orders;
    d.spec.n_periods = T;
    d.spec.burn_in = c.burn_in;
    d.spec.innovation = c.innovation;
    d.spec.arma.coef = c.arma;
    d.spec.garch.coef = c.garch;
    d.spec.arma.mu.resize(N);
    d.spec.garch.omega.resize(N);
    Rng rng(derive_seed(seed, {1}));
    std::normal_distribution<double> mu(c.mu_mean, c.mu_sd);
    std::uniform_real_distribution<double> om(c.omega_low, c.omega_high);
    for (int i = 0; i < N; ++i) {
        d.spec.arma.mu[i] = c.mu_sd > 0.0 ? mu(rng) : c.mu_mean;
        d.spec.garch.omega[i] = c.omega_high > c.omega_low ? om(rng) : c.omega_low;
    }
    d.panel = simulate(d.spec, derive_seed(seed, {2}));
    return d;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    ExperimentReport report;
    report.config = config;
    const int R = config.replications;
    for (std::size_t g = 0; g < config.grid.size(); ++g) {
        const auto [N, T] = config.grid[g];
        const bool with_garch = T > config.min_garch_T;
        GridReport gr;
        gr.N = N;
        gr.T = T;
        gr.replications = R;
        gr.garch_suppressed = !with_garch;

        std::vector<RepResult> reps(static_cast<std::size_t>(R));
        parallel_for(reps.size(), config.workers, [&](std::size_t r) {
            reps[r] = run_replication(config, N, T, with_garch, replication_seed(config.seed, g, r));
        });

        const auto cols = columns_for(config, with_garch);
        gr.estimates = Eigen::MatrixXd::Constant(R, static_cast<Eigen::Index>(cols.size()), kNaN);
        Eigen::MatrixXd ads = gr.estimates;
        for (int r = 0; r < R; ++r) {
            const RepResult& rep = reps[static_cast<std::size_t>(r)];
            if (!rep.ok) {
                ++gr.failures;
                gr.failure_log.push_back("rep " + std::to_string(r) + " seed " +
                                         std::to_string(replication_seed(config.seed, g, r)) + ": " + rep.message);
                continue;
            }
            for (std::size_t k = 0; k < cols.size(); ++k) {
                gr.estimates(r, static_cast<Eigen::Index>(k)) = rep.est.at(cols[k].estimator)[cols[k].index];
                ads(r, static_cast<Eigen::Index>(k)) = rep.ad.at(cols[k].estimator)[cols[k].index];
            }
        }
        gr.aborted = gr.failures > 0.05 * R;
        for (std::size_t k = 0; k < cols.size(); ++k) {
            ReportCell cell;
            cell.parameter = cols[k].parameter;
            cell.base = cols[k].base;
            cell.estimator = cols[k].estimator;
            cell.truth = cols[k].truth;
            if (!gr.aborted) {
                const auto col = gr.estimates.col(static_cast<Eigen::Index>(k));
                double sum = 0.0, ad_sum = 0.0;
                for (int r = 0; r < R; ++r) {
                    if (std::isnan(col[r])) continue;
                    sum += col[r];
                    ++cell.n;
                    const double a = ads(r, static_cast<Eigen::Index>(k));
                    if (std::isfinite(a)) {
                        ad_sum += a;
                        ++cell.n_ad;
                    }
                }
                if (cell.n > 0) {
                    const double mean = sum / cell.n;
                    double ss = 0.0;
                    for (int r = 0; r < R; ++r) {
                        if (!std::isnan(col[r])) ss += (col[r] - mean) * (col[r] - mean);
                    }
                    cell.bias = mean - cell.truth;
                    cell.sd = cell.n > 1 ? std::sqrt(ss / (cell.n - 1)) : 0.0;
                    cell.mean_ad = cell.n_ad > 0 ? ad_sum / cell.n_ad : kNaN;
                    cell.sd_ad = cell.n_ad > 0 ? cell.sd / cell.mean_ad : kNaN;
                }
            }
            gr.cells.push_back(cell);
        }
        report.points.push_back(std::move(gr));
    }
    mc_stderr(report);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

void mc_stderr(ExperimentReport& report) {
    for (auto& p : report.points) {
        for (auto& c : p.cells) {
            c.available = c.n > 0;
            c.mc_se = c.available ? c.sd / std::sqrt(static_cast<double>(c.n)) : kNaN;
        }
    }
}

std::string ExperimentReport::render_text() const {
    const auto cols = columns_for(config, true);
    std::ostringstream os;
    const char* titles[3] = {"Bias", "SD", "SD/AD"};
    for (int which = 0; which < 3; ++which) {
        os << titles[which] << "\n";
        os << "    N    T";
        for (const auto& c : cols) {
            os << std::string(std::max<int>(1, 9 - static_cast<int>(c.parameter.size())), ' ') << c.parameter;
        }
        os << "\n";
        for (const auto& p : points) {
            char head[32];
            std::snprintf(head, sizeof head, "%5d%5d", p.N, p.T);
            os << head;
            if (p.aborted) {
                os << "  aborted: " << p.failures << " of " << p.replications << " replications failed\n";
                continue;
            }
            for (const auto& c : cols) {
                const ReportCell* cell = p.cell(c.parameter);
                std::string v = "-----";
                if (cell != nullptr && cell->available) {
                    const double x = which == 0 ? cell->bias : which == 1 ? cell->sd : cell->sd_ad;
                    if (std::isfinite(x)) v = fmt("%.3f", x);
                }
                os << std::string(std::max<int>(1, 9 - static_cast<int>(v.size())), ' ') << v;
            }
            os << "\n";
        }
        os << "\n";
    }
    for (const auto& p : points) {
        if (p.failures > 0) {
            os << "N=" << p.N << " T=" << p.T << ": " << p.failures << " failed replications\n";
            for (const auto& f : p.failure_log) os << "  " << f << "\n";
        }
    }
    return os.str();
}

std::string ExperimentReport::render_csv() const {
    std::ostringstream os;
    os << "N,T,estimator,parameter,truth,n,bias,sd,mean_ad,sd_ad,mc_se,failures,aborted\n";
    for (const auto& p : points) {
        for (const auto& c : p.cells) {
            os << p.N << ',' << p.T << ',' << to_string(c.estimator) << ',' << c.parameter << ','
               << fmt("%.17g", c.truth) << ',' << c.n << ',' << fmt("%.17g", c.bias) << ','
               << fmt("%.17g", c.sd) << ',' << fmt("%.17g", c.mean_ad) << ',' << fmt("%.17g", c.sd_ad)
               << ',' << fmt("%.17g", c.mc_se) << ',' << p.failures << ',' << (p.aborted ? 1 : 0) << "\n";
        }
    }
    return os.str();
}

}  // namespace pagarch
