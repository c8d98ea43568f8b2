#include <benchmark/benchmark.h>

#include "nestdoa/array_model.hpp"
#include "nestdoa/covariance.hpp"
#include "nestdoa/solver.hpp"

namespace {

using namespace nestdoa;

CovarianceData overdetermined_covariance(int snapshots) {
  const ArrayGeometry g = ArrayGeometry::nested(3, 3);
  const Scenario s{{-30.3, 10.7, 45.2}, {1.0, 1.0, 1.0}, 0.3, snapshots, 7};
  return sample_covariance(simulate_snapshots(g, s));
}

void bm_solve(benchmark::State& state) {
  const ArrayGeometry g = ArrayGeometry::nested(3, 3);
  const CovarianceData cov = overdetermined_covariance(200);
  SolverConfig config;
  config.n_grid = static_cast<int>(state.range(0));
  int iterations = 0;
  for (auto _ : state) {
    const EstimationOutput out = solve(cov, g, config);
    iterations = out.iterations;
    benchmark::DoNotOptimize(out.doas_deg.data());
  }
  state.counters["outer_iterations"] = iterations;
}
BENCHMARK(bm_solve)->Arg(100)->Arg(200)->Arg(300)->Unit(benchmark::kMillisecond);

void bm_sigma(benchmark::State& state) {
  const ArrayGeometry g = ArrayGeometry::nested(3, 3);
  const CovarianceData cov = overdetermined_covariance(200);
  SolverConfig config;
  config.n_grid = static_cast<int>(state.range(0));
  const RealModel model = build_real_model(cov, 0.3, virtual_dictionary(g, init_grid(config)));
  const RealVector gamma = init_gamma(model);
  const auto path = static_cast<SigmaPath>(state.range(1));
  for (auto _ : state) {
    const SigmaFactorization sigma(model, gamma, path);
    benchmark::DoNotOptimize(sigma.dictionary_weights().data());
  }
}
BENCHMARK(bm_sigma)
    ->ArgsProduct({{8, 16, 64, 200}, {static_cast<int>(SigmaPath::Direct), static_cast<int>(SigmaPath::LowRank)}})
    ->ArgNames({"n_grid", "path"})
    ->Unit(benchmark::kMicrosecond);

void bm_refine(benchmark::State& state) {
  const ArrayGeometry g = ArrayGeometry::nested(3, 3);
  const CovarianceData cov = overdetermined_covariance(200);
  SolverConfig config;
  config.n_grid = static_cast<int>(state.range(0));
  SolverState s;
  s.grid_deg = init_grid(config);
  const RealModel model = build_real_model(cov, 0.3, virtual_dictionary(g, s.grid_deg));
  s.gamma = init_gamma(model);
  for (auto _ : state) {
    const RefineResult r = refine_grid(g, model, s, config);
    benchmark::DoNotOptimize(r.objective_after);
  }
}
BENCHMARK(bm_refine)->Arg(8)->Arg(32)->Arg(200)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
