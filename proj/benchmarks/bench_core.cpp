#include <benchmark/benchmark.h>

#include "rbmlab/discretize.hpp"
#include "rbmlab/simulate.hpp"
#include "rbmlab/spectral.hpp"

using namespace rbm;

namespace {

Domain lshape() { return Domain::polygon({{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}}, "lshape"); }

void BM_BuildGrid(benchmark::State& state) {
  const Domain d = Domain::horn(1, 1, 16);
  const double h = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_grid(d, h).size());
}
BENCHMARK(BM_BuildGrid)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_AssembleNeumann(benchmark::State& state) {
  const Grid g = build_grid(lshape(), 1.0 / static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(assemble_neumann(g).rows());
}
BENCHMARK(BM_AssembleNeumann)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_EigenDense(benchmark::State& state) {
  const Operator op = assemble_neumann(build_grid(Domain::rectangle(1, 1), 1.0 / static_cast<double>(state.range(0))));
  EigenOptions o;
  o.method = EigenMethod::dense;
  for (auto _ : state) benchmark::DoNotOptimize(eigensolve(op, op.rows(), o).count());
}
BENCHMARK(BM_EigenDense)->Arg(16)->Arg(24)->Unit(benchmark::kMillisecond);

void BM_EigenLanczos(benchmark::State& state) {
  const Operator op = assemble_neumann(build_grid(Domain::rectangle(1, 1), 1.0 / 48));
  EigenOptions o;
  o.method = EigenMethod::lanczos;
  for (auto _ : state) benchmark::DoNotOptimize(eigensolve(op, static_cast<int>(state.range(0)), o).count());
}
BENCHMARK(BM_EigenLanczos)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_KernelBlock(benchmark::State& state) {
  const Grid g = build_grid(Domain::rectangle(1, 1), 1.0 / 24);
  const SpectralDecomposition sd = eigensolve(assemble_neumann(g), static_cast<int>(g.size()));
  std::vector<int> cells(g.size());
  for (std::size_t c = 0; c < g.size(); ++c) cells[c] = static_cast<int>(c);
  for (auto _ : state) benchmark::DoNotOptimize(kernel_block(sd, 0.01, cells, cells).sum());
}
BENCHMARK(BM_KernelBlock)->Unit(benchmark::kMillisecond);

void BM_ReflectedPaths(benchmark::State& state) {
  const Domain d = lshape();
  SimulationSpec s;
  s.start = {0.5, 0.5};
  s.horizon = 0.1;
  s.step = 1e-4;
  s.paths = static_cast<std::size_t>(state.range(0));
  s.seed = 1;
  s.checkpoints = {0.1};
  for (auto _ : state) benchmark::DoNotOptimize(sample_paths(d, s).steps);
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}
BENCHMARK(BM_ReflectedPaths)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_KatoModulus(benchmark::State& state) {
  const Grid g = build_grid(Domain::rectangle(1, 1), 1.0 / 24);
  const SpectralDecomposition sd = eigensolve(assemble_neumann(g), static_cast<int>(g.size()));
  const Mask k = g.all_cells();
  const std::vector<double> times{1e-3, 1e-2, 1e-1};
  for (auto _ : state) benchmark::DoNotOptimize(kato_modulus(sd, g, k, times).size());
}
BENCHMARK(BM_KatoModulus)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
