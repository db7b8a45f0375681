#include <benchmark/benchmark.h>

#include <random>

#include "fedsaf/aggregation.hpp"

namespace {

std::vector<fedsaf::ParamVector> random_params(std::size_t m, std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d(0.0, 0.1);
  std::vector<fedsaf::ParamVector> out;
  for (std::size_t i = 0; i < m; ++i) {
    fedsaf::ParamVector v = fedsaf::ParamVector::zeros(n);
    for (auto& x : v.values) x = d(rng);
    out.push_back(std::move(v));
  }
  return out;
}

void BM_SimilarityWeights(benchmark::State& state) {
  const auto params = random_params(static_cast<std::size_t>(state.range(0)), 25120);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        fedsaf::similarity_weights(params, fedsaf::DistanceMetric::manhattan, 0.1, 1.0));
}
BENCHMARK(BM_SimilarityWeights)->Arg(5)->Arg(10)->Arg(20);

void BM_TwoStageAggregate(benchmark::State& state) {
  const auto params = random_params(static_cast<std::size_t>(state.range(0)), 25120);
  const auto xi = fedsaf::similarity_weights(params, fedsaf::DistanceMetric::manhattan, 0.1, 1.0);
  const auto gamma = fedsaf::uniform_weights(params.size());
  for (auto _ : state) benchmark::DoNotOptimize(fedsaf::fim_aggregate(gamma, fedsaf::amp_aggregate(xi, params)));
}
BENCHMARK(BM_TwoStageAggregate)->Arg(5)->Arg(10);

}  // namespace
