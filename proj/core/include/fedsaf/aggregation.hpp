#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedsaf/params.hpp"

namespace fedsaf {

enum class DistanceMetric { euclidean, manhattan, cosine };

std::string to_string(DistanceMetric metric);
/// Throws ConfigError listing the valid names.
DistanceMetric parse_metric(std::string_view name);

/// euclidean: squared L2. manhattan: L1. cosine: 1 - a.b / (|a||b| + 1e-8),
/// with two zero vectors defined as distance 1.
double pairwise_distance(const ParamVector& a, const ParamVector& b, DistanceMetric metric);

/// A(d) = 1 - exp(-d / sigma).
double attention(double d, double sigma);
/// A'(d) = exp(-d / sigma) / sigma.
double attention_derivative(double d, double sigma);

/// Attentive message passing weights. weight(i, j) is the coefficient of
/// client j's parameters in client i's intermediate model, so every row sums
/// to one and weight(i, i) closes the simplex.
struct SimilarityMatrix {
  std::size_t m = 0;
  std::vector<double> weights;  // row-major m x m
  DistanceMetric metric = DistanceMetric::manhattan;
  double alpha = 0.1;
  double sigma = 1.0;

  double weight(std::size_t i, std::size_t j) const { return weights[i * m + j]; }
  std::span<const double> row(std::size_t i) const { return {weights.data() + i * m, m}; }
};

/// Cap applied to a row's off-diagonal mass so the self-weight stays >= epsilon.
inline constexpr double kSelfWeightFloor = 1e-3;

SimilarityMatrix similarity_weights(std::span<const ParamVector> params, DistanceMetric metric,
                                    double alpha, double sigma);

/// z_i = sum_j weight(i, j) * params_j.
std::vector<ParamVector> amp_aggregate(const SimilarityMatrix& xi,
                                       std::span<const ParamVector> params);

struct AggregationWeights {
  std::vector<double> gamma;
};

/// gamma_i = tfim_i / sum(tfim); uniform when the sum is zero.
AggregationWeights fim_weights(std::span<const double> tfim);
AggregationWeights uniform_weights(std::size_t m);

/// p_i = gamma_i z_i + sum_{j != i} gamma_j z_j for every client i. All p_i
/// coincide; personalization across clients enters through z and the heads.
std::vector<ParamVector> fim_aggregate(const AggregationWeights& gamma,
                                       std::span<const ParamVector> z);

/// Size-weighted mean.
ParamVector fedavg_aggregate(std::span<const ParamVector> params, std::span<const std::size_t> sizes);

}  // namespace fedsaf
