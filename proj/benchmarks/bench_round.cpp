#include <benchmark/benchmark.h>

#include "fedsaf/config.hpp"
#include "fedsaf/server.hpp"

namespace {

void BM_RunRound(benchmark::State& state) {
  fedsaf::ExperimentConfig config;
  config.nhead = static_cast<std::size_t>(state.range(0));
  fedsaf::ModelSpec spec;
  const auto initial = fedsaf::make_clients(config, spec);
  const auto strategy = config.make_strategy();
  std::size_t round = 0;
  for (auto _ : state) {
    state.PauseTiming();
    auto clients = initial;
    state.ResumeTiming();
    benchmark::DoNotOptimize(fedsaf::run_round(clients, strategy, config.train, spec, ++round, config.seed));
  }
}
BENCHMARK(BM_RunRound)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
