#include <benchmark/benchmark.h>

#include "qsmlot/nn/unet.hpp"

using namespace qsmlot;
using namespace qsmlot::nn;

namespace {

Tensor5<float> random_input(int n, int c, int size, std::uint64_t seed) {
  Rng rng(seed);
  Tensor5<float> t(n, c, size, size, size);
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-3.0, 3.0));
  return t;
}

void BM_lotunet_forward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  LotUnetConfig cfg{LotMode::fixed, 1, UnetConfig{2, 8, 1, 1}};
  LotUnet<float> model(cfg);
  Rng rng(1);
  model.init(rng, 0.01);
  const auto x = random_input(1, 1, size, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(x, {0.02}, 3.0, false));
  }
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_lotunet_forward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_lotunet_train_step(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  LotUnetConfig cfg{LotMode::fixed, 1, UnetConfig{2, 8, 1, 1}};
  LotUnet<float> model(cfg);
  Rng rng(2);
  model.init(rng, 0.01);
  const auto x = random_input(4, 1, size, 3);
  const auto target = random_input(4, 1, size, 4);
  auto params = model.params();
  for (auto _ : state) {
    for (auto* p : params) p->zero_grad();
    Tensor5<float> grad;
    mse_loss(model.forward(x, {0.02, 0.02, 0.02, 0.02}, 3.0, true), target, &grad);
    model.backward(grad);
  }
}
BENCHMARK(BM_lotunet_train_step)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace
