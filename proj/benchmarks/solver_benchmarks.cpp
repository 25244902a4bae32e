#include <benchmark/benchmark.h>

#include "mtreg/covariance.hpp"
#include "mtreg/regression.hpp"
#include "mtreg/synthetic.hpp"

namespace {

using namespace mtreg;

SyntheticData make_instance(int m, int d, int n, int k) {
  SyntheticConfig config;
  config.m = m;
  config.d = d;
  config.n = n;
  config.k = k;
  config.noise_variance = 0.1;
  config.seed = 42;
  return generate_synthetic(config);
}

void BM_GenerateSynthetic(benchmark::State& state) {
  SyntheticConfig config;
  config.m = 30;
  config.d = static_cast<int>(state.range(0));
  config.n = 150;
  config.k = config.d / 5;
  config.noise_variance = 0.1;
  for (auto _ : state) {
    config.seed++;
    benchmark::DoNotOptimize(generate_synthetic(config));
  }
}
BENCHMARK(BM_GenerateSynthetic)->Arg(64)->Arg(256);

void BM_BuildSccQuadratic(benchmark::State& state) {
  const SyntheticData data =
      make_instance(30, static_cast<int>(state.range(0)), 150,
                    static_cast<int>(state.range(0)) / 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_scc_quadratic(data.dataset));
  }
}
BENCHMARK(BM_BuildSccQuadratic)->Arg(64)->Arg(256);

void BM_FitSccDiagonal(benchmark::State& state) {
  const SyntheticData data =
      make_instance(30, static_cast<int>(state.range(0)), 150,
                    static_cast<int>(state.range(0)) / 5);
  SolverConfig config;
  config.lambda = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_scc_diagonal(data.dataset, config));
  }
}
BENCHMARK(BM_FitSccDiagonal)->Arg(64)->Arg(256);

void BM_GroupLasso(benchmark::State& state) {
  const SyntheticData data =
      make_instance(30, static_cast<int>(state.range(0)), 150,
                    static_cast<int>(state.range(0)) / 5);
  const double lambda = 0.2 * group_lasso_zero_threshold(data.dataset);
  SolverConfig config;
  config.rel_tol = 1e-6;
  for (auto _ : state) {
    benchmark::DoNotOptimize(group_lasso_fit(data.dataset, lambda, config));
  }
}
BENCHMARK(BM_GroupLasso)->Arg(64)->Arg(256);

void BM_FitPartialFull(benchmark::State& state) {
  const SyntheticData data =
      make_instance(20, static_cast<int>(state.range(0)), 40,
                    static_cast<int>(state.range(0)) / 4);
  SolverConfig config;
  config.rel_tol = 1e-6;
  config.lambda = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_partial_full(data.dataset, config));
  }
}
BENCHMARK(BM_FitPartialFull)->Arg(16)->Arg(64);

void BM_RidgeWithCovariance(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const SyntheticData data = make_instance(1, d, 150, d / 5);
  SolverConfig fit_config;
  fit_config.lambda = 1.0;
  const DiagonalFit fit = fit_scc_diagonal(data.dataset, fit_config);
  RidgeSolveOptions options;
  options.ridge_lambda = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ridge_with_covariance(
        data.dataset.tasks[0], CovarianceEstimate(fit.covariance), options));
  }
}
BENCHMARK(BM_RidgeWithCovariance)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
