#include <benchmark/benchmark.h>

#include "qsmlot/background.hpp"
#include "qsmlot/datagen.hpp"
#include "qsmlot/dipole.hpp"
#include "qsmlot/rng.hpp"

using namespace qsmlot;

namespace {

void BM_forward_field(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Dims3 dims{n, n, n};
  const auto kernel = DipoleKernel::make(dims);
  Rng rng(7);
  ScalarVolume chi(dims, Unit::ppm, 0.0);
  for (auto& v : chi.data) v = 0.1 * rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_field(chi, kernel));
  }
  state.SetItemsProcessed(state.iterations() * chi.size());
}
BENCHMARK(BM_forward_field)->Arg(32)->Arg(64);

void BM_tkd_invert(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Dims3 dims{n, n, n};
  const auto kernel = DipoleKernel::make(dims);
  Rng rng(8);
  ScalarVolume field(dims, Unit::ppm, 0.0);
  for (auto& v : field.data) v = 0.1 * rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(tkd_invert(field, kernel, 0.2));
  }
}
BENCHMARK(BM_tkd_invert)->Arg(64);

void BM_resharp(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Dims3 dims{n, n, n};
  const Mask mask = make_brain_mask(dims);
  const auto bg = background_from_exterior_sources(dims, mask, 5, 2.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(resharp(bg, mask));
  }
}
BENCHMARK(BM_resharp)->Arg(48)->Unit(benchmark::kMillisecond);

}  // namespace
