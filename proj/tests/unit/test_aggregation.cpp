#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "../oracles.hpp"
#include "fedsaf/aggregation.hpp"
#include "fedsaf/errors.hpp"

using namespace fedsaf;

namespace {
constexpr DistanceMetric kMetrics[] = {DistanceMetric::euclidean, DistanceMetric::manhattan,
                                       DistanceMetric::cosine};

void check_simplex(const SimilarityMatrix& xi) {
  for (std::size_t i = 0; i < xi.m; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < xi.m; ++j) {
      CHECK(xi.weight(i, j) >= 0.0);
      sum += xi.weight(i, j);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}
}  // namespace

TEST_CASE("pairwise_distance") {
  const ParamVector a({1.0, 0.0}), b({0.0, 1.0});
  CHECK(pairwise_distance(a, b, DistanceMetric::euclidean) == 2.0);
  CHECK(pairwise_distance(a, b, DistanceMetric::manhattan) == 2.0);
  CHECK(pairwise_distance(a, b, DistanceMetric::cosine) == 1.0);
  CHECK(pairwise_distance(ParamVector({3.0}), ParamVector({1.0}), DistanceMetric::euclidean) == 4.0);
  CHECK(pairwise_distance(ParamVector({3.0}), ParamVector({1.0}), DistanceMetric::manhattan) == 2.0);

  const ParamVector v({0.3, -2.0, 5.0});
  CHECK(pairwise_distance(v, v, DistanceMetric::euclidean) == 0.0);
  CHECK(pairwise_distance(v, v, DistanceMetric::manhattan) == 0.0);
  CHECK(std::abs(pairwise_distance(v, v, DistanceMetric::cosine)) <= 1e-8);

  const ParamVector zero = ParamVector::zeros(3);
  CHECK(pairwise_distance(zero, zero, DistanceMetric::cosine) == 1.0);
  CHECK_THROWS_AS(pairwise_distance(a, v, DistanceMetric::manhattan), IntegrityError);
}

TEST_CASE("metric names") {
  for (auto m : kMetrics) CHECK(parse_metric(to_string(m)) == m);
  try {
    (void)parse_metric("mahalanobis");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("euclidean") != std::string::npos);
    CHECK(msg.find("manhattan") != std::string::npos);
    CHECK(msg.find("cosine") != std::string::npos);
  }
}

TEST_CASE("attention and its derivative") {
  CHECK(attention(0.0, 2.0) == 0.0);
  CHECK(attention(1e6, 1.0) == doctest::Approx(1.0));
  CHECK(attention(1e6, 1.0) <= 1.0);
  CHECK(attention(3.0 * std::log(2.0), 3.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(attention_derivative(0.0, 4.0) == 0.25);
  CHECK(attention_derivative(1.0, 1.0) == doctest::Approx(0.36787944117144233).epsilon(1e-14));
  CHECK(attention_derivative(0.0, 1.0) > attention_derivative(1.0, 1.0));
  CHECK(attention_derivative(1.0, 1.0) > attention_derivative(10.0, 1.0));
  CHECK_THROWS_AS(attention(1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(attention_derivative(1.0, -1.0), ConfigError);
}

TEST_CASE("similarity_weights small cases") {
  const auto one = similarity_weights(std::vector<ParamVector>{ParamVector({1.0})}, DistanceMetric::cosine, 0.1, 1.0);
  CHECK(one.m == 1);
  CHECK(one.weight(0, 0) == 1.0);

  const ParamVector v({0.5, -1.0});
  const auto two = similarity_weights(std::vector<ParamVector>{v, v}, DistanceMetric::euclidean, 0.25, 1.0);
  CHECK(two.weight(0, 1) == 0.25);
  CHECK(two.weight(1, 0) == 0.25);
  CHECK(two.weight(0, 0) == 0.75);
  CHECK(two.weight(1, 1) == 0.75);

  // straggler far from two close clients
  const std::vector<ParamVector> three{ParamVector({0.0, 0.0}), ParamVector({0.1, 0.0}),
                                       ParamVector({5.0, 5.0})};
  for (auto metric : {DistanceMetric::euclidean, DistanceMetric::manhattan}) {
    const auto xi = similarity_weights(three, metric, 0.3, 1.0);
    CHECK(xi.weight(0, 2) < xi.weight(0, 1));
    CHECK(xi.weight(2, 0) < xi.weight(1, 0));
    check_simplex(xi);
  }
}

TEST_CASE("similarity_weights caps large off-diagonal mass") {
  const ParamVector v({1.0});
  const std::vector<ParamVector> same(5, v);
  const auto xi = similarity_weights(same, DistanceMetric::manhattan, 2.0, 1.0);
  check_simplex(xi);
  CHECK(xi.weight(0, 0) == doctest::Approx(kSelfWeightFloor));
}

TEST_CASE("similarity invariants on random inputs") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial % 6);
    std::vector<ParamVector> v;
    for (std::size_t i = 0; i < m; ++i) v.push_back(oracle::random_vector(rng, 9, 0.3));
    const auto metric = kMetrics[trial % 3];
    const auto xi = similarity_weights(v, metric, 0.05 + 0.1 * (trial % 4), 1.0 + trial % 3);
    check_simplex(xi);

    if (metric == DistanceMetric::euclidean) {
      // translation invariance
      const ParamVector shift = oracle::random_vector(rng, 9, 4.0);
      std::vector<ParamVector> moved = v;
      for (auto& x : moved)
        for (std::size_t e = 0; e < x.size(); ++e) x[e] += shift[e];
      const auto xi2 = similarity_weights(moved, metric, xi.alpha, xi.sigma);
      for (std::size_t k = 0; k < xi.weights.size(); ++k)
        CHECK(std::abs(xi.weights[k] - xi2.weights[k]) <= 1e-12);
    }

    // permutation equivariance of z
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<ParamVector> pv;
    for (auto k : perm) pv.push_back(v[k]);
    const auto z = amp_aggregate(xi, v);
    const auto zp = amp_aggregate(similarity_weights(pv, metric, xi.alpha, xi.sigma), pv);
    for (std::size_t i = 0; i < m; ++i) CHECK(oracle::relative_error(zp[i], z[perm[i]]) <= 1e-12);
  }
}

TEST_CASE("amp_aggregate") {
  const std::vector<ParamVector> v{ParamVector({1.0, 2.0}), ParamVector({-3.0, 0.5}), ParamVector({7.0, 7.0})};
  SimilarityMatrix identity;
  identity.m = 3;
  identity.weights = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  CHECK(amp_aggregate(identity, v) == v);

  SimilarityMatrix half;
  half.m = 2;
  half.weights = {0.5, 0.5, 0.5, 0.5};
  const auto z = amp_aggregate(half, std::vector<ParamVector>{ParamVector({0.0}), ParamVector({2.0})});
  CHECK(z[0][0] == 1.0);
  CHECK(z[1][0] == 1.0);

  CHECK_THROWS_AS(amp_aggregate(half, v), IntegrityError);
}

TEST_CASE("amp_aggregate matches a double loop") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<ParamVector> v;
    for (int i = 0; i < 4; ++i) v.push_back(oracle::random_vector(rng, 6));
    const auto xi = similarity_weights(v, kMetrics[trial % 3], 0.2, 1.5);
    const auto z = amp_aggregate(xi, v);
    for (std::size_t i = 0; i < 4; ++i) {
      ParamVector expect = ParamVector::zeros(6);
      for (std::size_t e = 0; e < 6; ++e) {
        expect[e] = xi.weight(i, i) * v[i][e];
        for (std::size_t j = 0; j < 4; ++j)
          if (j != i) expect[e] += xi.weight(i, j) * v[j][e];
      }
      CHECK(oracle::relative_error(z[i], expect) <= 1e-12);
    }
  }
}

TEST_CASE("fim_weights") {
  CHECK(fim_weights(std::vector<double>{1, 1, 1, 1}).gamma == std::vector<double>(4, 0.25));
  CHECK(fim_weights(std::vector<double>{3, 1}).gamma == std::vector<double>{0.75, 0.25});
  CHECK(fim_weights(std::vector<double>{0, 0}).gamma == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(fim_weights(std::vector<double>{1, -1}), IntegrityError);
  CHECK_THROWS_AS(fim_weights(std::vector<double>{}), IntegrityError);
}

TEST_CASE("lowering one client's tFIM lowers its gamma and raises the rest") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> t(5);
    for (auto& x : t) x = u(rng);
    const auto before = fim_weights(t).gamma;
    const std::size_t k = static_cast<std::size_t>(trial) % 5;
    t[k] *= 0.5;
    const auto after = fim_weights(t).gamma;
    CHECK(std::abs(std::accumulate(after.begin(), after.end(), 0.0) - 1.0) <= 1e-9);
    CHECK(after[k] < before[k]);
    for (std::size_t i = 0; i < 5; ++i)
      if (i != k) CHECK(after[i] > before[i]);
  }
}

TEST_CASE("fim_aggregate") {
  const ParamVector v({1.5, -2.0});
  const auto same = fim_aggregate(AggregationWeights{{0.5, 0.5}}, std::vector<ParamVector>{v, v});
  CHECK(same[0] == v);
  CHECK(same[1] == v);

  const std::vector<ParamVector> z{ParamVector({1.0}), ParamVector({9.0})};
  const auto p = fim_aggregate(AggregationWeights{{1.0, 0.0}}, z);
  CHECK(p[0] == z[0]);
  CHECK(p[1] == z[0]);
  CHECK_THROWS_AS(fim_aggregate(AggregationWeights{{1.0}}, z), IntegrityError);
}

TEST_CASE("two-stage aggregation matches the expanded formula") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<ParamVector> tau;
    for (int i = 0; i < 3; ++i) tau.push_back(oracle::random_vector(rng, 5));
    const auto xi = similarity_weights(tau, kMetrics[trial], 0.3, 1.0);
    const auto gamma = fim_weights(std::vector<double>{u(rng), u(rng), u(rng)});
    const auto p = fim_aggregate(gamma, amp_aggregate(xi, tau));
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(oracle::relative_error(p[i], oracle::expanded_two_stage(xi, gamma.gamma, tau, i)) <= 1e-12);
  }
}

TEST_CASE("identical inputs are a fixed point") {
  const ParamVector v({0.25, -1.0, 3.0});
  const std::vector<ParamVector> same(4, v);
  for (auto metric : kMetrics) {
    const auto z = amp_aggregate(similarity_weights(same, metric, 0.1, 1.0), same);
    for (const auto& zi : z) CHECK(oracle::relative_error(zi, v) <= 1e-15);
    const auto p = fim_aggregate(fim_weights(std::vector<double>(4, 2.0)), same);
    for (const auto& pi : p) CHECK(pi == v);
  }
}

TEST_CASE("fedavg_aggregate") {
  const std::vector<ParamVector> v{ParamVector({2.0}), ParamVector({4.0})};
  CHECK(fedavg_aggregate(v, std::vector<std::size_t>{5, 5})[0] == 3.0);
  CHECK(fedavg_aggregate(std::vector<ParamVector>{ParamVector({0.0}), ParamVector({4.0})},
                         std::vector<std::size_t>{3, 1})[0] == 1.0);
  CHECK(fedavg_aggregate(std::vector<ParamVector>{v[0]}, std::vector<std::size_t>{9}) == v[0]);
  CHECK_THROWS_AS(fedavg_aggregate(v, std::vector<std::size_t>{0, 0}), IntegrityError);
}
