#include "fedsaf/server.hpp"

#include <algorithm>
#include <numeric>

#include "fedsaf/config.hpp"
#include "fedsaf/data.hpp"
#include "fedsaf/errors.hpp"
#include "fedsaf/rng.hpp"
#include "parallel.hpp"

namespace fedsaf {

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::fedsaf: return "fedsaf";
    case StrategyKind::fedavg: return "fedavg";
    case StrategyKind::fedprox: return "fedprox";
    case StrategyKind::fedamp: return "fedamp";
    case StrategyKind::fedrep: return "fedrep";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view name) {
  if (name == "fedsaf") return StrategyKind::fedsaf;
  if (name == "fedavg") return StrategyKind::fedavg;
  if (name == "fedprox") return StrategyKind::fedprox;
  if (name == "fedamp") return StrategyKind::fedamp;
  if (name == "fedrep") return StrategyKind::fedrep;
  throw ConfigError("unknown strategy '" + std::string(name) +
                    "'; valid options are {fedsaf, fedavg, fedprox, fedamp, fedrep}");
}

Strategy Strategy::make(StrategyKind kind, bool use_fim, bool use_split) {
  Strategy s;
  s.kind = kind;
  switch (kind) {
    case StrategyKind::fedsaf:
      s.use_fim = use_fim;
      s.use_split = use_split;
      break;
    case StrategyKind::fedrep:
      s.use_fim = false;
      s.use_split = true;
      break;
    default:
      s.use_fim = false;
      s.use_split = false;
  }
  return s;
}

void Strategy::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("strategy: sigma must be > 0");
  if (!(alpha >= 0.0)) throw ConfigError("strategy: alpha must be >= 0");
  if (!(mu_prox >= 0.0)) throw ConfigError("strategy: mu_prox must be >= 0");
  switch (kind) {
    case StrategyKind::fedsaf: break;
    case StrategyKind::fedrep:
      if (!use_split || use_fim) throw ConfigError("fedrep requires split on and FIM off");
      break;
    default:
      if (use_split || use_fim)
        throw ConfigError(to_string(kind) + " requires split and FIM off");
  }
}

std::uint64_t client_round_seed(std::uint64_t master_seed, int client_id, std::size_t round) {
  return derive_seed(master_seed, {0xc11e47, static_cast<std::uint64_t>(client_id), round});
}

namespace {

std::vector<std::size_t> train_sizes(const std::vector<ClientState>& states) {
  std::vector<std::size_t> sizes;
  sizes.reserve(states.size());
  for (const auto& s : states) sizes.push_back(s.train.size());
  return sizes;
}

std::vector<ParamVector> all_params(const std::vector<ClientState>& states) {
  std::vector<ParamVector> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.params);
  return out;
}

}  // namespace

std::vector<ClientEval> evaluate_clients(const std::vector<ClientState>& states,
                                         const Strategy& strategy, const ModelSpec& spec,
                                         std::size_t threads) {
  ParamVector global;
  if (strategy.is_global()) {
    const auto params = all_params(states);
    global = fedavg_aggregate(params, train_sizes(states));
  }
  std::vector<ClientEval> evals(states.size());
  detail::parallel_for(states.size(), threads, [&](std::size_t i) {
    const ParamVector& model = strategy.is_global() ? global : states[i].params;
    evals[i].train_loss = evaluate(model, spec, states[i].train.as_batch()).loss;
    evals[i].test = evaluate(model, spec, states[i].test.as_batch());
  });
  return evals;
}

RoundResult run_round(std::vector<ClientState>& states, const Strategy& strategy,
                      const LocalTrainConfig& cfg, const ModelSpec& spec, std::size_t round_k,
                      std::uint64_t master_seed, std::size_t threads) {
  if (states.empty()) throw IntegrityError("run_round: no clients");
  strategy.validate();
  const LayerSchema schema = spec.schema();
  const std::size_t m = states.size();
  for (const auto& s : states) {
    if (s.params.size() != schema.total_len())
      throw IntegrityError("client " + std::to_string(s.id) + ": parameter length " +
                           std::to_string(s.params.size()) + " does not match the shared schema (" +
                           std::to_string(schema.total_len()) + ")");
    if (s.nhead != (strategy.use_split ? states.front().nhead : 0))
      throw IntegrityError("client " + std::to_string(s.id) + ": nhead inconsistent with strategy");
  }
  const std::size_t nhead = strategy.use_split ? states.front().nhead : 0;
  if (strategy.use_split && nhead == 0)
    throw ConfigError("run_round: splitting requires nhead >= 1");

  RoundResult result;
  RoundMessages& msg = result.messages;

  // uplink: shared segment, tFIM and train size of every client
  for (const auto& s : states) {
    Uplink up;
    up.base_params = strategy.use_split ? split(s.params, schema, nhead).base : s.params;
    up.tfim = s.tfim;
    up.train_size = s.train.size();
    msg.uplink_scalars += up.base_params.size();
    msg.uplink.push_back(std::move(up));
  }
  std::vector<ParamVector> uploaded;
  uploaded.reserve(m);
  for (const auto& up : msg.uplink) uploaded.push_back(up.base_params);
  const auto sizes = train_sizes(states);

  // server aggregation (single-threaded barrier)
  switch (strategy.kind) {
    case StrategyKind::fedsaf:
    case StrategyKind::fedamp: {
      result.xi = similarity_weights(uploaded, strategy.metric, strategy.alpha, strategy.sigma);
      const auto z = amp_aggregate(result.xi, uploaded);
      if (strategy.use_fim) {
        std::vector<double> tfim;
        for (const auto& up : msg.uplink) tfim.push_back(up.tfim);
        result.gamma = fim_weights(tfim);
      } else {
        result.gamma = uniform_weights(m);
      }
      msg.downlink = fim_aggregate(result.gamma, z);
      break;
    }
    case StrategyKind::fedavg:
    case StrategyKind::fedprox:
    case StrategyKind::fedrep: {
      const ParamVector global = fedavg_aggregate(uploaded, sizes);
      msg.downlink.assign(m, global);
      const double total = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
      for (auto n : sizes) result.gamma.gamma.push_back(static_cast<double>(n) / total);
      break;
    }
  }
  for (const auto& d : msg.downlink) msg.downlink_scalars += d.size();

  // client updates
  detail::parallel_for(m, threads, [&](std::size_t i) {
    ClientState& s = states[i];
    s.rng_seed = client_round_seed(master_seed, s.id, round_k);
    const ParamVector& p = msg.downlink[i];
    const std::size_t effective = apply_straggler_policy(s, cfg);
    if (effective > 0) {
      switch (strategy.kind) {
        case StrategyKind::fedsaf:
        case StrategyKind::fedamp:
          s.params = strategy.use_split ? local_update_two_step(s, p, cfg, spec)
                                        : local_update_one_step(s, p, cfg, spec);
          break;
        case StrategyKind::fedrep: {
          LocalTrainConfig plain = cfg;
          plain.lambda = 0.0;
          s.params = local_update_two_step(s, p, plain, spec);
          break;
        }
        case StrategyKind::fedavg:
        case StrategyKind::fedprox: {
          ModelObjective objective(spec, s.train);
          ProxSgdOptions opt;
          opt.end = p.size();
          opt.center = p.values;
          opt.prox_coef = strategy.kind == StrategyKind::fedprox ? strategy.mu_prox : 0.0;
          opt.epochs = effective;
          opt.batch_size = cfg.batch_size;
          opt.lr = cfg.lr;
          opt.seed = derive_seed(s.rng_seed, {2});
          s.params = proximal_sgd(objective, p, opt);
          break;
        }
      }
    }
    // an offline straggler keeps its stale parameters; its tFIM is re-measured there
    s.tfim = compute_tfim(s, spec, cfg.tfim_batch);
  });

  result.evals = evaluate_clients(states, strategy, spec, threads);
  return result;
}

std::vector<ClientState> make_clients(const ExperimentConfig& config, ModelSpec& spec_out) {
  config.validate();
  Dataset data;
  switch (config.data.source) {
    case DataSource::synthetic:
      data = generate_synthetic(config.data.num_classes, config.data.samples_per_class,
                                config.data.dim, config.data.separation,
                                derive_seed(config.seed, {0xda7a}));
      break;
    case DataSource::fashion_mnist_idx:
      data = load_idx(config.data.images, config.data.labels, config.data.limit);
      break;
    case DataSource::csv:
      data = load_csv(config.data.csv);
      if (config.data.limit > 0 && config.data.limit < data.size()) {
        std::vector<std::size_t> rows(config.data.limit);
        std::iota(rows.begin(), rows.end(), 0);
        data = data.subset(rows);
      }
      break;
  }
  const std::uint64_t part_seed = derive_seed(config.seed, {0x9a97});
  const Partition part =
      config.data.iid
          ? iid_partition(data, config.data.clients, config.data.test_fraction, part_seed)
          : partition_noniid(data, config.data.clients,
                             std::min(config.data.classes_per_client, data.num_classes),
                             config.data.unbalance, config.data.test_fraction, part_seed);

  ModelSpec spec;
  spec.input_dim = data.features.cols;
  spec.hidden_dims = config.hidden;
  spec.num_classes = data.num_classes;
  spec.validate();
  const Strategy strategy = config.make_strategy();
  const std::size_t nhead = strategy.use_split ? config.nhead : 0;
  spec.schema().head_offset(nhead);  // range check

  const ParamVector init = init_params(spec, derive_seed(config.seed, {0x1417}));
  std::vector<ClientState> states;
  for (std::size_t i = 0; i < part.clients.size(); ++i) {
    ClientState s;
    s.id = static_cast<int>(i);
    s.params = init;
    s.nhead = nhead;
    s.train = part.clients[i].train;
    s.test = part.clients[i].test;
    s.is_straggler = std::find(config.stragglers.begin(), config.stragglers.end(), s.id) !=
                     config.stragglers.end();
    s.rng_seed = client_round_seed(config.seed, s.id, 0);
    states.push_back(std::move(s));
  }
  spec_out = spec;
  return states;
}

MetricsLog run_experiment(const ExperimentConfig& config, std::size_t threads) {
  ModelSpec spec;
  std::vector<ClientState> states = make_clients(config, spec);
  const Strategy strategy = config.make_strategy();
  const std::size_t nhead = strategy.use_split ? config.nhead : 0;

  MetricsLog log;
  log.transmitted_per_client = count_transmitted(spec.schema(), nhead);

  auto append_row = [&](std::size_t round, const std::vector<ClientEval>& evals, std::size_t uplink) {
    std::vector<double> loss, acc;
    std::vector<std::optional<double>> auc;
    for (const auto& e : evals) {
      loss.push_back(e.train_loss);
      acc.push_back(e.test.accuracy);
      auc.push_back(e.test.auc);
    }
    const std::size_t before = log.rows.empty() ? 0 : log.rows.back().cumulative_uplink_scalars;
    log.rows.push_back(make_row(round, loss, acc, auc, uplink, before));
  };

  try {
    detail::parallel_for(states.size(), threads, [&](std::size_t i) {
      states[i].tfim = compute_tfim(states[i], spec, config.train.tfim_batch);
    });
    append_row(0, evaluate_clients(states, strategy, spec, threads), 0);
  } catch (const std::exception& e) {
    throw Error(std::string("round 0: ") + e.what());
  }

  for (std::size_t k = 1; k <= config.rounds; ++k) {
    try {
      RoundResult r = run_round(states, strategy, config.train, spec, k, config.seed, threads);
      log.gamma_history.push_back(r.gamma.gamma);
      append_row(k, r.evals, r.messages.uplink_scalars);
    } catch (const std::exception& e) {
      throw Error("round " + std::to_string(k) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace fedsaf
