#include <benchmark/benchmark.h>

#include <spreco/experiment.hpp>

using namespace spreco;

namespace {

Coefficients example_coeffs(double T) {
  Coefficients c = Coefficients::heat(T);
  c.b3 = [](const Point&) { return 0.1; };
  return c;
}

void BM_AssembleMass1D(benchmark::State& state) {
  const FemSpace space(build_interval_mesh(static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(assemble_mass(space));
}
BENCHMARK(BM_AssembleMass1D)->Arg(20)->Arg(200)->Arg(2000);

void BM_AssembleStiffness2D(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FemSpace space(build_rect_mesh(n, n, {-1, 1, -1, 1}));
  for (auto _ : state) benchmark::DoNotOptimize(assemble_stiffness(space));
}
BENCHMARK(BM_AssembleStiffness2D)->Arg(10)->Arg(20)->Arg(40);

void BM_ForwardSolve(benchmark::State& state) {
  const FemSpace space(build_interval_mesh(20));
  const TimeGrid grid = TimeGrid::uniform(1.0, static_cast<int>(state.range(0)));
  const SpdeOperators ops(space, example_coeffs(1.0), grid);
  const Vector y0 = space.restrict_interior(
      l2_project(space, [](const Point& p) { return 4 * p.x * (1 - p.x); }));
  const BrownianPath path = BrownianPath::sample(grid, 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward_solve(ops, y0, path));
}
BENCHMARK(BM_ForwardSolve)->Arg(400)->Arg(800);

void BM_RecursionBuild(benchmark::State& state) {
  const FemSpace space(build_interval_mesh(static_cast<int>(state.range(0))));
  const TimeGrid grid = TimeGrid::uniform(1.0, 800);
  auto ops = std::make_shared<const SpdeOperators>(space, example_coeffs(1.0), grid);
  const Vector offset = Vector::Zero(ops->interior_count());
  for (auto _ : state)
    benchmark::DoNotOptimize(
        AdjointRecursion(ops, offset, AdjointRecursion::Storage::FinalOnly));
}
BENCHMARK(BM_RecursionBuild)->Arg(20)->Arg(40);

void BM_GradientEval(benchmark::State& state) {
  const FemSpace space(build_interval_mesh(20));
  const TimeGrid grid = TimeGrid::uniform(1.0, 800);
  auto ops = std::make_shared<const SpdeOperators>(space, example_coeffs(1.0), grid);
  const Vector u0 = space.restrict_interior(
      l2_project(space, [](const Point& p) { return 4 * p.x * (1 - p.x); }));
  const Vector data = apply_forward_map(*ops, u0, BrownianPath::sample(grid, 2));
  const TikhonovProblem prob = TikhonovProblem::expectation(ops, data);
  const Vector y = 0.5 * u0;
  for (auto _ : state) benchmark::DoNotOptimize(prob.gradient(y, 1e-8));
}
BENCHMARK(BM_GradientEval);

void BM_FullReconstruction(benchmark::State& state) {
  ExperimentConfig cfg;
  cfg.example = "parabola_1d";
  cfg.n_cells = 20;
  cfg.T = 1.0;
  cfg.time_step = 1.0 / 800.0;
  cfg.deltas = {0.05};
  cfg.runs = 1;
  cfg.seed = 5;
  cfg.output_dir = "bench_out";
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(run_sweep(cfg));
}
BENCHMARK(BM_FullReconstruction)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
