#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "cloudcluster/bounds.hpp"
#include "cloudcluster/exact.hpp"
#include "cloudcluster/optimize.hpp"
#include "cloudcluster/simulate.hpp"

using namespace cloudcluster;

namespace {

ClusterSpec random_cluster(int n, std::uint64_t seed) {
    std::mt19937 gen(static_cast<unsigned>(seed));
    std::uniform_real_distribution<double> fa(0.1, 0.35), md(0.15, 0.45);
    ClusterSpec c;
    for (int i = 0; i < n; ++i) c.sensors.push_back({fa(gen), md(gen), 0.3});
    c.gamma = 0.25 * (ell_min(c) + 3.0 * ell_max(c));
    c.tie_prob = 0.5;
    return c;
}

SystemConfig small_system(int n_c, int n, std::uint64_t seed) {
    SystemConfig cfg;
    cfg.p1 = 0.65;
    cfg.loss_fa = 100.0;
    cfg.loss_md = 200.0;
    for (int j = 0; j < n_c; ++j) cfg.clusters.push_back(random_cluster(n, seed + j));
    return cfg;
}

void bm_cluster_enumeration(benchmark::State& state) {
    const ClusterSpec c = random_cluster(static_cast<int>(state.range(0)), 7);
    for (auto _ : state) {
        auto e = cluster_errors_enumerate(c);
        benchmark::DoNotOptimize(e);
    }
}
BENCHMARK(bm_cluster_enumeration)->Arg(8)->Arg(12)->Arg(16);

void bm_cluster_binomial(benchmark::State& state) {
    const HomogeneousClusterSpec c{static_cast<int>(state.range(0)), 0.2, 0.35, 12.0, 0.5};
    for (auto _ : state) {
        auto e = cluster_errors_homogeneous(c);
        benchmark::DoNotOptimize(e);
    }
}
BENCHMARK(bm_cluster_binomial)->Arg(50)->Arg(500);

void bm_improved_bennett(benchmark::State& state) {
    const BoundInputs in{50, 3.7, 1.9, 0.8};
    for (auto _ : state) {
        double u = improved_bennett_bound(in);
        benchmark::DoNotOptimize(u);
    }
}
BENCHMARK(bm_improved_bennett);

void bm_lambert_w(benchmark::State& state) {
    double x = 0.01;
    for (auto _ : state) {
        x = x > 1e6 ? 0.01 : x * 1.7;
        double w = lambert_w0(x);
        benchmark::DoNotOptimize(w);
    }
}
BENCHMARK(bm_lambert_w);

void bm_fc_enumeration(benchmark::State& state) {
    const int n_c = static_cast<int>(state.range(0));
    std::vector<ClusterQuality> qs;
    for (int j = 0; j < n_c; ++j)
        qs.push_back({0.1 + 0.02 * j, 0.2 + 0.01 * j, 0.7, false});
    for (auto _ : state) {
        auto e = fc_errors_enumerate(qs, 0.4);
        benchmark::DoNotOptimize(e);
    }
}
BENCHMARK(bm_fc_enumeration)->Arg(6)->Arg(10);

void bm_evaluate_system(benchmark::State& state) {
    const SystemEvaluator eval(small_system(5, 10, 11));
    for (auto _ : state) {
        auto rep = eval.evaluate();
        benchmark::DoNotOptimize(rep);
    }
}
BENCHMARK(bm_evaluate_system);

void bm_monte_carlo_trials(benchmark::State& state) {
    const SimulationPlan plan = make_simulation_plan(small_system(5, 10, 11));
    std::uint64_t t = 0;
    for (auto _ : state) {
        auto out = run_trial(plan, 99, t++);
        benchmark::DoNotOptimize(out);
    }
}
BENCHMARK(bm_monte_carlo_trials);

void bm_gauss_seidel(benchmark::State& state) {
    const SystemConfig cfg = small_system(4, 8, 3);
    GaussSeidelConfig gs;
    gs.r_gamma = 10;
    gs.r_p = 20;
    for (auto _ : state) {
        GaussSeidelOptimizer opt(cfg.clusters, cfg, gs);
        auto sol = opt.run();
        benchmark::DoNotOptimize(sol);
    }
}
BENCHMARK(bm_gauss_seidel);

} // namespace

BENCHMARK_MAIN();
