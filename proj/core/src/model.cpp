#include "fedsaf/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fedsaf/errors.hpp"
#include "fedsaf/metrics.hpp"
#include "fedsaf/rng.hpp"

namespace fedsaf {

void ModelSpec::validate() const {
  if (input_dim == 0) throw ConfigError("model: input_dim must be positive");
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  for (auto h : hidden_dims)
    if (h == 0) throw ConfigError("model: hidden layer widths must be positive");
}

LayerSchema ModelSpec::schema() const {
  std::vector<std::vector<std::size_t>> shapes;
  std::size_t in = input_dim;
  for (auto h : hidden_dims) {
    shapes.push_back({h, in});
    in = h;
  }
  shapes.push_back({num_classes, in});
  return LayerSchema(shapes);
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  const LayerSchema schema = spec.schema();
  ParamVector p = ParamVector::zeros(schema.total_len());
  Rng rng(derive_seed(seed, {0x1a11}));
  for (const auto& layer : schema.layers()) {
    const std::size_t out = layer.shape[0], in = layer.shape[1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < out * in; ++i) p[layer.offset + i] = dist(rng);
  }
  return p;
}

namespace {

struct Activations {
  // inputs to each layer (post-activation of the previous one); last entry is logits
  std::vector<Matrix> values;
};

void check_params(const ParamVector& params, const LayerSchema& schema) {
  if (params.size() != schema.total_len())
    throw IntegrityError("parameter length " + std::to_string(params.size()) +
                         " does not match model schema length " +
                         std::to_string(schema.total_len()));
}

Matrix dense(const Matrix& a, const double* w, const double* b, std::size_t out) {
  Matrix z(a.rows, out);
  const std::size_t in = a.cols;
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double* x = a.data.data() + r * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wr = w + o * in;
      double s = b[o];
      for (std::size_t k = 0; k < in; ++k) s += wr[k] * x[k];
      z(r, o) = s;
    }
  }
  return z;
}

Activations run_forward(const ParamVector& params, const LayerSchema& schema, Matrix inputs) {
  Activations acts;
  acts.values.push_back(std::move(inputs));
  const auto& layers = schema.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t out = layers[l].shape[0], in = layers[l].shape[1];
    const double* w = params.values.data() + layers[l].offset;
    Matrix z = dense(acts.values.back(), w, w + out * in, out);
    if (l + 1 < layers.size())
      for (auto& v : z.data) v = v > 0.0 ? v : 0.0;
    acts.values.push_back(std::move(z));
  }
  return acts;
}

void check_inputs(const ModelSpec& spec, const Matrix& inputs) {
  if (inputs.cols != spec.input_dim)
    throw IntegrityError("input width " + std::to_string(inputs.cols) + " != model input_dim " +
                         std::to_string(spec.input_dim));
}

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t num_classes) {
  if (labels.size() != rows)
    throw IntegrityError("label count " + std::to_string(labels.size()) + " != row count " +
                         std::to_string(rows));
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw IntegrityError("label " + std::to_string(y) + " outside [0, " +
                           std::to_string(num_classes) + ")");
}

}  // namespace

Matrix forward(const ParamVector& params, const ModelSpec& spec, const Matrix& inputs) {
  const LayerSchema schema = spec.schema();
  check_params(params, schema);
  check_inputs(spec, inputs);
  return std::move(run_forward(params, schema, inputs).values.back());
}

Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) sum += (p(r, c) = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < logits.cols; ++c) p(r, c) /= sum;
  }
  return p;
}

double nll_loss(const Matrix& logits, std::span<const int> labels) {
  if (logits.rows == 0) throw IntegrityError("nll_loss: empty batch");
  check_labels(labels, logits.rows, logits.cols);
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    total += mx + std::log(sum) - row[static_cast<std::size_t>(labels[r])];
  }
  return total / static_cast<double>(logits.rows);
}

ParamVector gradient_rows(const ParamVector& params, const ModelSpec& spec, const Matrix& inputs,
                          std::span<const int> labels, std::span<const std::size_t> rows) {
  const LayerSchema schema = spec.schema();
  check_params(params, schema);
  check_inputs(spec, inputs);
  if (labels.size() != inputs.rows) throw IntegrityError("gradient: labels/rows mismatch");
  if (rows.empty()) throw IntegrityError("gradient: empty batch");

  Matrix x(rows.size(), inputs.cols);
  std::vector<int> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= inputs.rows) throw IntegrityError("gradient: row index out of range");
    std::copy_n(inputs.data.begin() + static_cast<std::ptrdiff_t>(rows[i] * inputs.cols),
                inputs.cols, x.data.begin() + static_cast<std::ptrdiff_t>(i * inputs.cols));
    y[i] = labels[rows[i]];
  }
  check_labels(y, x.rows, spec.num_classes);

  const Activations acts = run_forward(params, schema, std::move(x));
  const auto& layers = schema.layers();
  const std::size_t n = rows.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  // dL/dlogits = (softmax - onehot) / n
  Matrix delta = softmax(acts.values.back());
  for (std::size_t r = 0; r < n; ++r) {
    delta(r, static_cast<std::size_t>(y[r])) -= 1.0;
    for (std::size_t c = 0; c < delta.cols; ++c) delta(r, c) *= inv_n;
  }

  ParamVector grad = ParamVector::zeros(schema.total_len());
  for (std::size_t l = layers.size(); l-- > 0;) {
    const std::size_t out = layers[l].shape[0], in = layers[l].shape[1];
    const Matrix& a = acts.values[l];
    double* gw = grad.values.data() + layers[l].offset;
    double* gb = gw + out * in;
    for (std::size_t r = 0; r < n; ++r) {
      const double* ar = a.data.data() + r * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta(r, o);
        if (d == 0.0) continue;
        gb[o] += d;
        double* g = gw + o * in;
        for (std::size_t k = 0; k < in; ++k) g[k] += d * ar[k];
      }
    }
    if (l == 0) break;
    const double* w = params.values.data() + layers[l].offset;
    Matrix prev(n, in);
    for (std::size_t r = 0; r < n; ++r) {
      double* pr = prev.data.data() + r * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta(r, o);
        if (d == 0.0) continue;
        const double* wr = w + o * in;
        for (std::size_t k = 0; k < in; ++k) pr[k] += d * wr[k];
      }
      // ReLU derivative: a = relu(z) so a > 0 iff z > 0
      const double* ar = a.data.data() + r * in;
      for (std::size_t k = 0; k < in; ++k)
        if (ar[k] <= 0.0) pr[k] = 0.0;
    }
    delta = std::move(prev);
  }
  return grad;
}

ParamVector gradient(const ParamVector& params, const ModelSpec& spec, const Batch& batch) {
  std::vector<std::size_t> rows(batch.inputs.rows);
  std::iota(rows.begin(), rows.end(), 0);
  return gradient_rows(params, spec, batch.inputs, batch.labels, rows);
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& grad, double lr) {
  if (params.size() != grad.size())
    throw IntegrityError("sgd_step: params length " + std::to_string(params.size()) +
                         " != gradient length " + std::to_string(grad.size()));
  ParamVector out = params;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lr * grad[i];
  return out;
}

EvalResult evaluate(const ParamVector& params, const ModelSpec& spec, const Batch& batch) {
  if (batch.inputs.rows == 0) throw IntegrityError("evaluate: empty batch");
  const Matrix logits = forward(params, spec, batch.inputs);
  EvalResult res;
  res.loss = nll_loss(logits, batch.labels);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto row = logits.row(r);
    // max_element returns the first maximum: ties go to the lowest class index
    const auto pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (pred == batch.labels[r]) ++correct;
  }
  res.accuracy = static_cast<double>(correct) / static_cast<double>(logits.rows);
  const Matrix probs = softmax(logits);
  res.auc = macro_auc(probs.data, spec.num_classes, batch.labels);
  return res;
}

}  // namespace fedsaf
