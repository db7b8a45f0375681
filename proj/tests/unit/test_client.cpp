#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "fedsaf/client.hpp"
#include "fedsaf/data.hpp"
#include "fedsaf/errors.hpp"

using namespace fedsaf;

namespace {

// f(theta) = 0.5 |theta - target|^2 regardless of the sampled rows.
class Quadratic final : public LocalObjective {
 public:
  explicit Quadratic(ParamVector target, std::size_t n = 1) : target_(std::move(target)), n_(n) {}
  std::size_t sample_count() const override { return n_; }
  ParamVector gradient(const ParamVector& p, std::span<const std::size_t>) const override {
    ParamVector g = p;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= target_[i];
    return g;
  }

 private:
  ParamVector target_;
  std::size_t n_;
};

class ConstantGradient final : public LocalObjective {
 public:
  explicit ConstantGradient(ParamVector g) : g_(std::move(g)) {}
  std::size_t sample_count() const override { return 10; }
  ParamVector gradient(const ParamVector&, std::span<const std::size_t>) const override { return g_; }

 private:
  ParamVector g_;
};

struct Fixture {
  ModelSpec spec{6, {5}, 3};
  ClientState state;

  explicit Fixture(std::size_t nhead = 0) {
    const Dataset d = generate_synthetic(3, 30, 6, 3.0, 11);
    std::vector<std::size_t> tr, te;
    for (std::size_t r = 0; r < d.size(); ++r) (r % 4 == 0 ? te : tr).push_back(r);
    state.train = d.subset(tr);
    state.test = d.subset(te);
    state.params = init_params(spec, 3);
    state.nhead = nhead;
    state.rng_seed = 99;
  }
};

}  // namespace

TEST_CASE("proximal_sgd converges on a quadratic") {
  const Quadratic q(ParamVector({1.0, 1.0, 1.0}));
  ProxSgdOptions opt;
  opt.end = 3;
  opt.epochs = 100;
  opt.batch_size = 1;
  opt.lr = 0.1;
  const ParamVector out = proximal_sgd(q, ParamVector::zeros(3), opt);
  for (double v : out.values) CHECK(std::abs(v - 1.0) <= 1e-3);
}

TEST_CASE("proximal term alone contracts toward the center") {
  const ConstantGradient zero(ParamVector::zeros(2));
  const std::vector<double> center{2.0, -2.0};
  ProxSgdOptions opt;
  opt.end = 2;
  opt.center = center;
  opt.prox_coef = 0.5;
  opt.epochs = 3;
  opt.batch_size = 10;
  opt.lr = 0.2;
  const ParamVector out = proximal_sgd(zero, ParamVector::zeros(2), opt);
  const double shrink = std::pow(1.0 - 0.2 * 0.5, 3);
  CHECK(out[0] == doctest::Approx(2.0 * (1.0 - shrink)).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(-2.0 * (1.0 - shrink)).epsilon(1e-14));
}

TEST_CASE("proximal_sgd leaves coordinates outside the range bitwise intact") {
  Fixture f;
  ModelObjective obj(f.spec, f.state.train);
  ProxSgdOptions opt;
  opt.begin = 10;
  opt.end = 30;
  opt.epochs = 2;
  opt.lr = 0.5;
  opt.seed = 4;
  const ParamVector out = proximal_sgd(obj, f.state.params, opt);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i >= 10 && i < 30) continue;
    CHECK(out[i] == f.state.params[i]);
  }
  bool moved = false;
  for (std::size_t i = 10; i < 30; ++i) moved |= out[i] != f.state.params[i];
  CHECK(moved);

  opt.begin = 0;
  opt.end = out.size();
  opt.lr = 0.0;
  CHECK(proximal_sgd(obj, f.state.params, opt) == f.state.params);
  opt.end = out.size() + 1;
  CHECK_THROWS_AS(proximal_sgd(obj, f.state.params, opt), IntegrityError);
}

TEST_CASE("gradient_trace") {
  CHECK(gradient_trace(Quadratic(ParamVector({0.5, 0.5})), ParamVector({0.5, 0.5}), 64, 1) == 0.0);
  CHECK(gradient_trace(ConstantGradient(ParamVector({0.3, -0.4})), ParamVector::zeros(2), 64, 1) ==
        doctest::Approx(0.25).epsilon(1e-15));
  const double base = gradient_trace(ConstantGradient(ParamVector({0.3, -0.4})), ParamVector::zeros(2), 64, 1);
  const double scaled = gradient_trace(ConstantGradient(ParamVector({0.9, -1.2})), ParamVector::zeros(2), 64, 1);
  CHECK(scaled == doctest::Approx(9.0 * base).epsilon(1e-14));
}

TEST_CASE("compute_tfim is deterministic and non-negative") {
  Fixture f;
  const double a = compute_tfim(f.state, f.spec, 16);
  CHECK(a > 0.0);
  CHECK(compute_tfim(f.state, f.spec, 16) == a);
  // a batch at least as large as the dataset uses every sample
  ModelObjective obj(f.spec, f.state.train);
  const ParamVector g = gradient(f.state.params, f.spec, f.state.train.as_batch());
  double full = 0.0;
  for (double v : g.values) full += v * v;
  CHECK(compute_tfim(f.state, f.spec, 1000) == doctest::Approx(full).epsilon(1e-12));
}

TEST_CASE("one-step update with lambda=0 ignores the aggregate") {
  Fixture f;
  LocalTrainConfig cfg;
  cfg.lambda = 0.0;
  std::mt19937_64 rng(2);
  const ParamVector p1 = oracle::random_vector(rng, f.state.params.size());
  const ParamVector p2 = oracle::random_vector(rng, f.state.params.size());
  const ParamVector a = local_update_one_step(f.state, p1, cfg, f.spec);
  CHECK(a == local_update_one_step(f.state, p2, cfg, f.spec));
  CHECK_FALSE(a == f.state.params);
}

TEST_CASE("one-step update with a strong prox term lands near the aggregate") {
  Fixture f;
  LocalTrainConfig cfg;
  cfg.lambda = 19.0;  // lr * coefficient = 0.95
  std::mt19937_64 rng(3);
  const ParamVector p = oracle::random_vector(rng, f.state.params.size(), 0.2);
  const ParamVector out = local_update_one_step(f.state, p, cfg, f.spec);
  CHECK(oracle::relative_error(out, p) < oracle::relative_error(f.state.params, p) * 0.1);
  f.state.nhead = 1;
  CHECK_THROWS_AS(local_update_one_step(f.state, p, cfg, f.spec), ConfigError);
}

TEST_CASE("two-step update installs the base and keeps the structure") {
  Fixture f(1);
  const LayerSchema schema = f.spec.schema();
  const std::size_t cut = schema.head_offset(1);
  std::mt19937_64 rng(5);
  const ParamVector p_base = oracle::random_vector(rng, cut, 0.3);
  LocalTrainConfig cfg;

  // both stages run, so base and head both leave their starting points
  cfg.prox_steps = 1;
  cfg.local_epochs = 5;
  cfg.straggler_epochs = 0;
  ClientState s = f.state;
  const ParamVector out = local_update_two_step(s, p_base, cfg, f.spec);
  REQUIRE(out.size() == f.state.params.size());
  bool base_moved = false, head_moved = false;
  for (std::size_t i = 0; i < cut; ++i) base_moved |= out[i] != p_base[i];
  for (std::size_t i = cut; i < out.size(); ++i) head_moved |= out[i] != f.state.params[i];
  CHECK(base_moved);
  CHECK(head_moved);

  // with lr tiny the result stays close to (p_base, old head)
  cfg.lr = 1e-9;
  const ParamVector still = local_update_two_step(s, p_base, cfg, f.spec);
  for (std::size_t i = 0; i < cut; ++i) CHECK(std::abs(still[i] - p_base[i]) <= 1e-6);
  for (std::size_t i = cut; i < out.size(); ++i) CHECK(std::abs(still[i] - f.state.params[i]) <= 1e-6);

  CHECK_THROWS_AS(local_update_two_step(s, f.state.params, cfg, f.spec), IntegrityError);
  s.nhead = 0;
  CHECK_THROWS_AS(local_update_two_step(s, p_base, cfg, f.spec), ConfigError);
}

TEST_CASE("a zero-epoch straggler's two-step update only installs the base") {
  Fixture f(1);
  f.state.is_straggler = true;
  LocalTrainConfig cfg;
  cfg.straggler_epochs = 0;
  const std::size_t cut = f.spec.schema().head_offset(1);
  std::mt19937_64 rng(6);
  const ParamVector p_base = oracle::random_vector(rng, cut);
  const ParamVector out = local_update_two_step(f.state, p_base, cfg, f.spec);
  for (std::size_t i = 0; i < cut; ++i) CHECK(out[i] == p_base[i]);
  for (std::size_t i = cut; i < out.size(); ++i) CHECK(out[i] == f.state.params[i]);
}

TEST_CASE("straggler policy and epoch scaling") {
  LocalTrainConfig cfg;
  cfg.local_epochs = 5;
  cfg.straggler_epochs = 2;
  ClientState s;
  CHECK(apply_straggler_policy(s, cfg) == 5);
  s.is_straggler = true;
  CHECK(apply_straggler_policy(s, cfg) == 2);
  CHECK(scale_epochs(5, 2, 5) == 2);
  CHECK(scale_epochs(3, 2, 5) == 1);
  CHECK(scale_epochs(3, 0, 5) == 0);
  CHECK(scale_epochs(4, 5, 5) == 4);
}

TEST_CASE("LocalTrainConfig validation") {
  LocalTrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.prox_coefficient() == 1.0);
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.alpha_k = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
