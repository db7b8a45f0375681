#include "fedsaf/client.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "fedsaf/errors.hpp"
#include "fedsaf/rng.hpp"

namespace fedsaf {

namespace {
// sub-stream ids under a client's per-round seed
constexpr std::uint64_t kHeadStream = 1;
constexpr std::uint64_t kBaseStream = 2;
constexpr std::uint64_t kTfimStream = 3;
}  // namespace

void LocalTrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
  if (!(lambda >= 0.0)) throw ConfigError("train.lambda must be >= 0");
  if (!(alpha_k > 0.0)) throw ConfigError("train.alpha_k must be > 0");
  if (local_epochs == 0) throw ConfigError("train.local_epochs must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (prox_steps == 0) throw ConfigError("train.prox_steps must be positive");
  if (tfim_batch == 0) throw ConfigError("fim.batch must be positive");
}

ParamVector ModelObjective::gradient(const ParamVector& params,
                                     std::span<const std::size_t> rows) const {
  return gradient_rows(params, spec_, data_.features, data_.labels, rows);
}

ParamVector proximal_sgd(const LocalObjective& objective, ParamVector theta, const ProxSgdOptions& opt) {
  if (opt.begin > opt.end || opt.end > theta.size())
    throw IntegrityError("proximal_sgd: coordinate range [" + std::to_string(opt.begin) + ", " +
                         std::to_string(opt.end) + ") outside parameter length " +
                         std::to_string(theta.size()));
  if (opt.prox_coef != 0.0 && opt.center.size() != theta.size())
    throw IntegrityError("proximal_sgd: proximal center length " + std::to_string(opt.center.size()) +
                         " != parameter length " + std::to_string(theta.size()));
  const std::size_t n = objective.sample_count();
  if (opt.epochs == 0 || opt.begin == opt.end) return theta;
  if (n == 0) throw IntegrityError("proximal_sgd: no training samples");
  if (opt.batch_size == 0) throw ConfigError("proximal_sgd: batch_size must be positive");

  Rng rng(opt.seed);
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += opt.batch_size) {
      const std::size_t stop = std::min(n, start + opt.batch_size);
      const ParamVector g = objective.gradient(
          theta, std::span<const std::size_t>(order.data() + start, stop - start));
      for (std::size_t i = opt.begin; i < opt.end; ++i) {
        double step = g[i];
        if (opt.prox_coef != 0.0) step += opt.prox_coef * (theta[i] - opt.center[i]);
        theta[i] -= opt.lr * step;
      }
    }
  }
  return theta;
}

double gradient_trace(const LocalObjective& objective, const ParamVector& params,
                      std::size_t batch_size, std::uint64_t seed) {
  const std::size_t n = objective.sample_count();
  if (n == 0) throw IntegrityError("tFIM: client has no training samples");
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  const std::size_t b = std::min(batch_size, n);
  if (b < n) {
    Rng rng(seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(b);
  }
  const ParamVector g = objective.gradient(params, rows);
  double trace = 0.0;
  for (double v : g.values) trace += v * v;
  return trace;
}

double compute_tfim(const ClientState& state, const ModelSpec& spec, std::size_t batch_size) {
  if (state.train.size() == 0)
    throw IntegrityError("client " + std::to_string(state.id) + ": empty training set");
  ModelObjective objective(spec, state.train);
  return gradient_trace(objective, state.params, batch_size, derive_seed(state.rng_seed, {kTfimStream}));
}

std::size_t scale_epochs(std::size_t epochs, std::size_t effective, std::size_t local_epochs) {
  if (local_epochs == 0) return 0;
  return epochs * effective / local_epochs;
}

std::size_t apply_straggler_policy(const ClientState& state, const LocalTrainConfig& cfg) {
  return state.is_straggler ? cfg.straggler_epochs : cfg.local_epochs;
}

ParamVector local_update_one_step(const ClientState& state, const ParamVector& p,
                                  const LocalTrainConfig& cfg, const ModelSpec& spec) {
  if (state.nhead != 0)
    throw ConfigError("one-step update requires splitting disabled (nhead=0)");
  if (p.size() != state.params.size())
    throw IntegrityError("one-step update: aggregate length " + std::to_string(p.size()) +
                         " != model length " + std::to_string(state.params.size()));
  const std::size_t effective = apply_straggler_policy(state, cfg);
  ModelObjective objective(spec, state.train);
  ProxSgdOptions opt;
  opt.begin = 0;
  opt.end = p.size();
  opt.center = p.values;
  opt.prox_coef = cfg.prox_coefficient();
  opt.epochs = scale_epochs(cfg.prox_steps, effective, cfg.local_epochs);
  opt.batch_size = cfg.batch_size;
  opt.lr = cfg.lr;
  opt.seed = derive_seed(state.rng_seed, {kBaseStream});
  return proximal_sgd(objective, state.params, opt);
}

ParamVector local_update_two_step(const ClientState& state, const ParamVector& p_base,
                                  const LocalTrainConfig& cfg, const ModelSpec& spec) {
  if (state.nhead == 0)
    throw ConfigError("two-step update requires nhead >= 1; use the one-step update");
  const LayerSchema schema = spec.schema();
  SplitView view = split(state.params, schema, state.nhead);
  if (p_base.size() != view.base.size())
    throw IntegrityError("two-step update: aggregate base length " + std::to_string(p_base.size()) +
                         " != base segment length " + std::to_string(view.base.size()));
  view.base = p_base;
  ParamVector theta = merge(view, schema);
  const std::size_t cut = view.base.size();
  const std::size_t effective = apply_straggler_policy(state, cfg);
  ModelObjective objective(spec, state.train);

  ProxSgdOptions head;
  head.begin = cut;
  head.end = theta.size();
  head.epochs = scale_epochs(cfg.local_epochs, effective, cfg.local_epochs);
  head.batch_size = cfg.batch_size;
  head.lr = cfg.lr;
  head.seed = derive_seed(state.rng_seed, {kHeadStream});
  theta = proximal_sgd(objective, std::move(theta), head);

  // proximal center: p_base on the base, current head (unused) on the rest
  std::vector<double> center = theta.values;
  std::copy(p_base.values.begin(), p_base.values.end(), center.begin());
  ProxSgdOptions base;
  base.begin = 0;
  base.end = cut;
  base.center = center;
  base.prox_coef = cfg.prox_coefficient();
  base.epochs = scale_epochs(cfg.prox_steps, effective, cfg.local_epochs);
  base.batch_size = cfg.batch_size;
  base.lr = cfg.lr;
  base.seed = derive_seed(state.rng_seed, {kBaseStream});
  return proximal_sgd(objective, std::move(theta), base);
}

}  // namespace fedsaf
