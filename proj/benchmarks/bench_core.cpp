#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "nmde/genome_model.hpp"
#include "nmde/lrbh.hpp"
#include "nmde/matern.hpp"
#include "nmde/model_sampler.hpp"
#include "nmde/nonmarginal.hpp"
#include "nmde/posterior.hpp"
#include "nmde/priors.hpp"
#include "nmde/simulate.hpp"

using namespace nmde;

namespace {

void BM_MaternCorrelation(benchmark::State& state) {
    const double nu = static_cast<double>(state.range(0)) / 4.0;
    double d = 1.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(matern_correlation(d, nu, 5e4));
        d = d < 2e5 ? d * 1.3 : 1.0;
    }
}
BENCHMARK(BM_MaternCorrelation)->Arg(1)->Arg(6)->Arg(40)->Arg(200);

void BM_StrandCov(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = 1e3 + 7919.0 * static_cast<double>(i);
    const StrandHyperParams h{1.0, 1.5, 2e4};
    for (auto _ : state) benchmark::DoNotOptimize(strand_cov(x, h));
}
BENCHMARK(BM_StrandCov)->Arg(10)->Arg(50)->Arg(200);

PosteriorModel make_model(int m) {
    const auto names = synthetic_mirna_names(m);
    const auto ann = synthetic_annotation(names, 4, 1e6, 3);
    SimulationSpec spec;
    spec.n = 18;
    spec.seed = 5;
    const auto sim = simulate_dataset(ann, names, spec);
    return PosteriorModel{sim.data.z, GenomeModel(ann, build_design_matrix(ann, names)),
                          make_hyperprior_spec(ann, sim.data.z), {}, true};
}

void BM_LogPosterior(benchmark::State& state) {
    const auto model = make_model(static_cast<int>(state.range(0)));
    PosteriorEvaluator eval(model);
    Vector x = default_initial_state(model).pack();
    const int m = model.m();
    int i = 0;
    for (auto _ : state) {
        // psi-only moves hit the cached factor
        x(i % m) += 1e-3;
        benchmark::DoNotOptimize(eval(x));
        ++i;
    }
}
BENCHMARK(BM_LogPosterior)->Arg(30)->Arg(100);

void BM_OptimizeDecisions(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    const int t = 2000;
    Rng rng = make_stream(9, 0);
    std::normal_distribution<double> normal;
    Matrix psi(t, m);
    for (int s = 0; s < t; ++s) {
        double prev = 0.0;
        for (int i = 0; i < m; ++i) {
            prev = 0.6 * prev + 0.8 * normal(rng);
            psi(s, i) = prev + (i % 7 == 0 ? 1.5 : 0.0);
        }
    }
    const auto ind = IndicatorMatrix::from_draws(psi);
    const Matrix corr = (psi.rowwise() - psi.colwise().mean()).transpose() *
                        (psi.rowwise() - psi.colwise().mean()) / (t - 1.0);
    const Vector sd = corr.diagonal().cwiseSqrt();
    const Matrix r = sd.cwiseInverse().asDiagonal() * corr * sd.cwiseInverse().asDiagonal();
    const auto groups = form_groups(r);
    for (auto _ : state) benchmark::DoNotOptimize(optimize_decisions(ind, groups, 0.5));
}
BENCHMARK(BM_OptimizeDecisions)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_BootstrapPvalue(benchmark::State& state) {
    const std::vector<double> z{1.9, 0.8, 1.6, 2.3, 0.7, 1.5, 1.2, 2.0, 1.1, 1.7, 0.9, 1.4, 2.2, 1.8, 0.6, 1.3, 1.0, 2.1};
    BootstrapOptions opt;
    opt.replicates = static_cast<int>(state.range(0));
    std::uint64_t seed = 1;
    for (auto _ : state) benchmark::DoNotOptimize(bootstrap_pvalue(z, opt, seed++));
}
BENCHMARK(BM_BootstrapPvalue)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
