#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "fedsaf/data.hpp"
#include "fedsaf/model.hpp"
#include "fedsaf/params.hpp"

namespace fedsaf {

struct LocalTrainConfig {
  double lr = 0.05;
  std::size_t local_epochs = 5;
  std::size_t batch_size = 32;
  double lambda = 1.0;
  double alpha_k = 1.0;
  std::size_t prox_steps = 5;  // epochs spent on the proximal objective
  std::size_t tfim_batch = 64;
  std::size_t straggler_epochs = 0;

  void validate() const;
  double prox_coefficient() const { return lambda / alpha_k; }

  friend bool operator==(const LocalTrainConfig&, const LocalTrainConfig&) = default;
};

struct ClientState {
  int id = 0;
  ParamVector params;
  std::size_t nhead = 0;
  Dataset train;
  Dataset test;
  double tfim = 0.0;
  bool is_straggler = false;
  std::uint64_t rng_seed = 0;  // refreshed by the server every round
};

/// Differentiable local loss over an indexed set of samples.
class LocalObjective {
 public:
  virtual ~LocalObjective() = default;
  virtual std::size_t sample_count() const = 0;
  /// Gradient of the mean loss over the given sample indices.
  virtual ParamVector gradient(const ParamVector& params, std::span<const std::size_t> rows) const = 0;
};

/// Softmax NLL of a ModelSpec classifier on a dataset.
class ModelObjective final : public LocalObjective {
 public:
  ModelObjective(const ModelSpec& spec, const Dataset& data) : spec_(spec), data_(data) {}
  std::size_t sample_count() const override { return data_.size(); }
  ParamVector gradient(const ParamVector& params, std::span<const std::size_t> rows) const override;

 private:
  const ModelSpec& spec_;
  const Dataset& data_;
};

/// Minibatch SGD on objective + (prox_coef / 2) * |theta - center|^2 over the
/// coordinates [begin, end). Coordinates outside the range are never written.
struct ProxSgdOptions {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::span<const double> center;  // may be empty when prox_coef == 0
  double prox_coef = 0.0;
  std::size_t epochs = 0;
  std::size_t batch_size = 32;
  double lr = 0.05;
  std::uint64_t seed = 0;
};

ParamVector proximal_sgd(const LocalObjective& objective, ParamVector start, const ProxSgdOptions& opt);

/// Sum of squared gradient entries of the batch-mean loss on one deterministic
/// minibatch of up to `batch_size` samples.
double gradient_trace(const LocalObjective& objective, const ParamVector& params,
                      std::size_t batch_size, std::uint64_t seed);

double compute_tfim(const ClientState& state, const ModelSpec& spec, std::size_t batch_size);

/// Full-model proximal update toward p (splitting disabled).
ParamVector local_update_one_step(const ClientState& state, const ParamVector& p,
                                  const LocalTrainConfig& cfg, const ModelSpec& spec);

/// Installs p_base, trains the head with the base frozen, then trains the base
/// on the proximal objective with the head frozen. Returns the merged model.
ParamVector local_update_two_step(const ClientState& state, const ParamVector& p_base,
                                  const LocalTrainConfig& cfg, const ModelSpec& spec);

/// Local epochs this client runs in the current round.
std::size_t apply_straggler_policy(const ClientState& state, const LocalTrainConfig& cfg);

/// `epochs` scaled by effective / local_epochs, rounded down.
std::size_t scale_epochs(std::size_t epochs, std::size_t effective, std::size_t local_epochs);

}  // namespace fedsaf
