#include "fedsaf/aggregation.hpp"

#include <cmath>
#include <numeric>

#include "fedsaf/errors.hpp"

namespace fedsaf {

std::string to_string(DistanceMetric metric) {
  switch (metric) {
    case DistanceMetric::euclidean: return "euclidean";
    case DistanceMetric::manhattan: return "manhattan";
    case DistanceMetric::cosine: return "cosine";
  }
  return "?";
}

DistanceMetric parse_metric(std::string_view name) {
  if (name == "euclidean") return DistanceMetric::euclidean;
  if (name == "manhattan") return DistanceMetric::manhattan;
  if (name == "cosine") return DistanceMetric::cosine;
  throw ConfigError("unknown distance metric '" + std::string(name) +
                    "'; valid options are {euclidean, manhattan, cosine}");
}

double pairwise_distance(const ParamVector& a, const ParamVector& b, DistanceMetric metric) {
  if (a.size() != b.size())
    throw IntegrityError("pairwise_distance: lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  const std::size_t n = a.size();
  switch (metric) {
    case DistanceMetric::euclidean: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return s;
    }
    case DistanceMetric::manhattan: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += std::abs(a[i] - b[i]);
      return s;
    }
    case DistanceMetric::cosine: {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
      }
      if (na == 0.0 && nb == 0.0) return 1.0;
      return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb) + 1e-8);
    }
  }
  return 0.0;
}

namespace {
void check_sigma(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("attention: sigma must be > 0");
}
}  // namespace

double attention(double d, double sigma) {
  check_sigma(sigma);
  return 1.0 - std::exp(-d / sigma);
}

double attention_derivative(double d, double sigma) {
  check_sigma(sigma);
  return std::exp(-d / sigma) / sigma;
}

SimilarityMatrix similarity_weights(std::span<const ParamVector> params, DistanceMetric metric,
                                    double alpha, double sigma) {
  check_sigma(sigma);
  if (params.empty()) throw IntegrityError("similarity_weights: no clients");
  if (!(alpha >= 0.0)) throw ConfigError("similarity_weights: alpha must be >= 0");
  const std::size_t m = params.size();
  SimilarityMatrix xi;
  xi.m = m;
  xi.metric = metric;
  xi.alpha = alpha;
  xi.sigma = sigma;
  xi.weights.assign(m * m, 0.0);

  // distances are symmetric: compute the upper triangle once
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const double w = alpha * attention_derivative(pairwise_distance(params[i], params[j], metric), sigma);
      xi.weights[i * m + j] = w;
      xi.weights[j * m + i] = w;
    }

  const double cap = 1.0 - kSelfWeightFloor;
  for (std::size_t i = 0; i < m; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) off += xi.weights[i * m + j];
    if (off > cap) {
      const double scale = cap / off;
      off = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        if (j != i) off += (xi.weights[i * m + j] *= scale);
    }
    xi.weights[i * m + i] = 1.0 - off;
  }
  return xi;
}

std::vector<ParamVector> amp_aggregate(const SimilarityMatrix& xi,
                                       std::span<const ParamVector> params) {
  if (params.size() != xi.m)
    throw IntegrityError("amp_aggregate: " + std::to_string(params.size()) + " clients for a " +
                         std::to_string(xi.m) + "x" + std::to_string(xi.m) + " matrix");
  std::vector<ParamVector> z;
  z.reserve(xi.m);
  for (std::size_t i = 0; i < xi.m; ++i) z.push_back(linear_combination(xi.row(i), params));
  return z;
}

AggregationWeights fim_weights(std::span<const double> tfim) {
  if (tfim.empty()) throw IntegrityError("fim_weights: no clients");
  double total = 0.0;
  for (std::size_t i = 0; i < tfim.size(); ++i) {
    if (!(tfim[i] >= 0.0) || !std::isfinite(tfim[i]))
      throw IntegrityError("fim_weights: tFIM of client " + std::to_string(i) +
                           " must be finite and >= 0");
    total += tfim[i];
  }
  if (total == 0.0) return uniform_weights(tfim.size());
  AggregationWeights w;
  w.gamma.reserve(tfim.size());
  for (double t : tfim) w.gamma.push_back(t / total);
  return w;
}

AggregationWeights uniform_weights(std::size_t m) {
  if (m == 0) throw IntegrityError("uniform_weights: no clients");
  return {std::vector<double>(m, 1.0 / static_cast<double>(m))};
}

std::vector<ParamVector> fim_aggregate(const AggregationWeights& gamma,
                                       std::span<const ParamVector> z) {
  if (gamma.gamma.size() != z.size())
    throw IntegrityError("fim_aggregate: " + std::to_string(gamma.gamma.size()) +
                         " weights for " + std::to_string(z.size()) + " models");
  // every client's p is the same gamma mixture; compute once
  const ParamVector p = linear_combination(gamma.gamma, z);
  return std::vector<ParamVector>(z.size(), p);
}

ParamVector fedavg_aggregate(std::span<const ParamVector> params, std::span<const std::size_t> sizes) {
  if (params.size() != sizes.size())
    throw IntegrityError("fedavg_aggregate: sizes and models differ in count");
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total == 0) throw IntegrityError("fedavg_aggregate: total sample count is zero");
  std::vector<double> w;
  w.reserve(sizes.size());
  for (auto n : sizes) w.push_back(static_cast<double>(n) / static_cast<double>(total));
  return linear_combination(w, params);
}

}  // namespace fedsaf
