#include <benchmark/benchmark.h>

#include "qsmlot/phase.hpp"
#include "qsmlot/rng.hpp"

using namespace qsmlot;

namespace {

ScalarVolume random_phase(int n, std::uint64_t seed) {
  Rng rng(seed);
  ScalarVolume v(Dims3{n, n, n}, Unit::radians, 0.0);
  for (auto& x : v.data) x = rng.uniform(-3.0, 3.0);
  return v;
}

void BM_stencil_apply(benchmark::State& state) {
  const auto v = random_phase(static_cast<int>(state.range(0)), 1);
  const auto k = LaplacianStencil::canonical27();
  for (auto _ : state) {
    benchmark::DoNotOptimize(stencil_apply(v, k));
  }
  state.SetItemsProcessed(state.iterations() * v.size());
}
BENCHMARK(BM_stencil_apply)->Arg(32)->Arg(64);

void BM_lot(benchmark::State& state) {
  const auto v = random_phase(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lot(v, 3.0, 0.02));
  }
  state.SetItemsProcessed(state.iterations() * v.size());
}
BENCHMARK(BM_lot)->Arg(32)->Arg(64);

void BM_laplacian_unwrap(benchmark::State& state) {
  const auto v = random_phase(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(laplacian_unwrap(v));
  }
}
BENCHMARK(BM_laplacian_unwrap)->Arg(64);

}  // namespace
