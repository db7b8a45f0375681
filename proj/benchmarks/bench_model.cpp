#include <benchmark/benchmark.h>

#include <random>

#include "fedsaf/model.hpp"

namespace {

void BM_Gradient(benchmark::State& state) {
  const fedsaf::ModelSpec spec{784, {static_cast<std::size_t>(state.range(0))}, 10};
  const auto params = fedsaf::init_params(spec, 1);
  fedsaf::Batch batch;
  batch.inputs = fedsaf::Matrix(32, 784);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& x : batch.inputs.data) x = u(rng);
  for (int i = 0; i < 32; ++i) batch.labels.push_back(i % 10);
  for (auto _ : state) benchmark::DoNotOptimize(fedsaf::gradient(params, spec, batch));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Gradient)->Arg(32)->Arg(64);

}  // namespace
