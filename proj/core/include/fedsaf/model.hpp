#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedsaf/params.hpp"

namespace fedsaf {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

enum class Activation { relu };

/// Logistic regression (no hidden layers) or an MLP with ReLU hidden layers.
struct ModelSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t num_classes = 2;
  Activation activation = Activation::relu;

  void validate() const;
  /// One schema layer per dense layer (weights + bias).
  LayerSchema schema() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct Batch {
  Matrix inputs;
  std::vector<int> labels;
};

/// Glorot-uniform weights, zero biases.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

Matrix forward(const ParamVector& params, const ModelSpec& spec, const Matrix& inputs);

/// Mean softmax negative log-likelihood over the rows of `logits`.
double nll_loss(const Matrix& logits, std::span<const int> labels);

/// Row-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

/// Gradient of nll_loss(forward(params, inputs), labels), in schema order.
ParamVector gradient(const ParamVector& params, const ModelSpec& spec, const Batch& batch);

/// Same as `gradient` but restricted to the listed rows of a larger batch.
ParamVector gradient_rows(const ParamVector& params, const ModelSpec& spec, const Matrix& inputs,
                          std::span<const int> labels, std::span<const std::size_t> rows);

ParamVector sgd_step(const ParamVector& params, const ParamVector& grad, double lr);

struct EvalResult {
  double accuracy = 0.0;
  std::optional<double> auc;  // nullopt when the batch holds a single class
  double loss = 0.0;
};

EvalResult evaluate(const ParamVector& params, const ModelSpec& spec, const Batch& batch);

}  // namespace fedsaf
