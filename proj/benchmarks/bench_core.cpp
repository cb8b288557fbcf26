#include "pagarch/arma_ls.hpp"
#include "pagarch/garch_vtqml.hpp"
#include "pagarch/lq_form.hpp"
#include "pagarch/model.hpp"

#include <benchmark/benchmark.h>

using namespace pagarch;

namespace {

PanelData panel(int N, int T) {
    SimulationSpec s;
    s.orders = {1, 1, 1, 1, 1};
    s.n_periods = T;
    s.arma.coef.beta = Vector::Constant(1, 3.0);
    s.arma.coef.phi = Vector::Constant(1, 0.3);
    s.arma.coef.psi = Vector::Constant(1, 0.3);
    s.garch.coef.tau = Vector::Constant(1, 0.2);
    s.garch.coef.nu = Vector::Constant(1, 0.4);
    s.arma.mu = Vector::Zero(N);
    s.garch.omega = Vector::Constant(N, 2.0);
    return simulate(s, 1);
}

Vector truth() {
    Vector l(3);
    l << 3.0, 0.3, 0.3;
    return l;
}

void BM_ConcentratedObjective(benchmark::State& st) {
    const PanelData p = panel(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
    const ModelOrders o{1, 1, 1, 1, 1};
    const Vector l = truth();
    for (auto _ : st) benchmark::DoNotOptimize(concentrated_objective(o, l, p));
    st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(1));
}
BENCHMARK(BM_ConcentratedObjective)->Args({50, 100})->Args({100, 300});

void BM_Gradient(benchmark::State& st) {
    const PanelData p = panel(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
    const ModelOrders o{1, 1, 1, 1, 1};
    const Vector l = truth();
    for (auto _ : st) benchmark::DoNotOptimize(arma_gradient(o, l, p));
}
BENCHMARK(BM_Gradient)->Args({50, 100})->Args({100, 300});

void BM_FitArma(benchmark::State& st) {
    const PanelData p = panel(50, 100);
    for (auto _ : st) benchmark::DoNotOptimize(fit_arma(p, {1, 1, 1, 1, 1}, {.compute_covariance = false}));
}
BENCHMARK(BM_FitArma)->Unit(benchmark::kMillisecond);

void BM_FitGarch(benchmark::State& st) {
    const PanelData p = panel(50, static_cast<int>(st.range(0)));
    const ArmaEstimate a = evaluate_arma(p, {1, 1, 1, 1, 1}, truth());
    GarchFitOptions g;
    g.compute_covariance = false;
    for (auto _ : st) benchmark::DoNotOptimize(fit_garch(a.residuals, 1, 1, g));
}
BENCHMARK(BM_FitGarch)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_LqVariance(benchmark::State& st) {
    const LQProblem p = LQProblem::centering(static_cast<int>(st.range(0)), 50, LQInnovation::normal());
    const MomentProfile prof = profile_for(p);
    for (auto _ : st) benchmark::DoNotOptimize(lq_variance(p, prof));
}
BENCHMARK(BM_LqVariance)->Arg(10)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
