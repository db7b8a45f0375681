#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fedsaf/aggregation.hpp"
#include "fedsaf/client.hpp"
#include "fedsaf/metrics.hpp"
#include "fedsaf/model.hpp"

namespace fedsaf {

enum class StrategyKind { fedsaf, fedavg, fedprox, fedamp, fedrep };

std::string to_string(StrategyKind kind);
StrategyKind parse_strategy(std::string_view name);

/// Round-loop variant. fedamp is fedsaf with FIM and splitting off; fedrep
/// keeps a local head and FedAvg-aggregates the base.
struct Strategy {
  StrategyKind kind = StrategyKind::fedsaf;
  bool use_fim = true;
  bool use_split = false;
  DistanceMetric metric = DistanceMetric::manhattan;
  double alpha = 0.1;
  double sigma = 1.0;
  double mu_prox = 0.01;

  /// Builds a strategy with the flags each baseline implies.
  static Strategy make(StrategyKind kind, bool use_fim, bool use_split);
  void validate() const;
  /// True for fedavg/fedprox, which evaluate a single global model.
  bool is_global() const { return kind == StrategyKind::fedavg || kind == StrategyKind::fedprox; }
};

struct Uplink {
  ParamVector base_params;
  double tfim = 0.0;
  std::size_t train_size = 0;
};

struct RoundMessages {
  std::vector<Uplink> uplink;
  std::vector<ParamVector> downlink;
  std::size_t uplink_scalars = 0;
  std::size_t downlink_scalars = 0;
};

struct ClientEval {
  double train_loss = 0.0;
  EvalResult test;
};

struct RoundResult {
  RoundMessages messages;
  std::vector<ClientEval> evals;
  AggregationWeights gamma;   // second-stage weights (fedsaf/fedamp), else size weights
  SimilarityMatrix xi;        // empty (m = 0) for non-AMP strategies
};

/// Per-client, per-round seed.
std::uint64_t client_round_seed(std::uint64_t master_seed, int client_id, std::size_t round);

/// One synchronous communication round: collect uplinks from the clients'
/// current parameters, aggregate, downlink, run local updates (in parallel up
/// to `threads`), refresh tFIM and evaluate. `states` is updated in place.
RoundResult run_round(std::vector<ClientState>& states, const Strategy& strategy,
                      const LocalTrainConfig& cfg, const ModelSpec& spec, std::size_t round_k,
                      std::uint64_t master_seed, std::size_t threads = 1);

/// Evaluates each client on its local train and test sets. Global strategies
/// evaluate the size-weighted mean model, others each client's own model.
std::vector<ClientEval> evaluate_clients(const std::vector<ClientState>& states,
                                         const Strategy& strategy, const ModelSpec& spec,
                                         std::size_t threads = 1);

struct ExperimentConfig;

/// Builds the dataset, partition and identically initialized clients.
std::vector<ClientState> make_clients(const ExperimentConfig& config, ModelSpec& spec_out);

/// Runs K rounds and returns one metrics row per round (plus round 0).
MetricsLog run_experiment(const ExperimentConfig& config, std::size_t threads = 1);

}  // namespace fedsaf
