#include "fedsaf/params.hpp"

#include <cmath>
#include <string>

#include "fedsaf/errors.hpp"

namespace fedsaf {

LayerSchema::LayerSchema(const std::vector<std::vector<std::size_t>>& shapes) {
  std::size_t offset = 0;
  int id = 0;
  for (const auto& shape : shapes) {
    if (shape.size() != 2 || shape[0] == 0 || shape[1] == 0)
      throw ConfigError("layer " + std::to_string(id) + ": shape must be {out, in} with positive dims");
    LayerDesc d;
    d.layer_id = id++;
    d.shape = shape;
    d.offset = offset;
    d.length = shape[0] * shape[1] + shape[0];
    offset += d.length;
    layers_.push_back(std::move(d));
  }
  total_len_ = offset;
}

std::size_t LayerSchema::head_offset(std::size_t nhead) const {
  if (nhead > layers_.size())
    throw ConfigError("nhead=" + std::to_string(nhead) + " exceeds the schema's " +
                      std::to_string(layers_.size()) + " layers");
  if (nhead == 0) return total_len_;
  return layers_[layers_.size() - nhead].offset;
}

SplitView split(const ParamVector& params, const LayerSchema& schema, std::size_t nhead) {
  const std::size_t cut = schema.head_offset(nhead);
  if (params.size() != schema.total_len())
    throw IntegrityError("split: parameter length " + std::to_string(params.size()) +
                         " != schema length " + std::to_string(schema.total_len()));
  SplitView view;
  view.nhead = nhead;
  view.base.values.assign(params.values.begin(), params.values.begin() + static_cast<std::ptrdiff_t>(cut));
  view.head.values.assign(params.values.begin() + static_cast<std::ptrdiff_t>(cut), params.values.end());
  return view;
}

ParamVector merge(const SplitView& view, const LayerSchema& schema) {
  const std::size_t cut = schema.head_offset(view.nhead);
  if (view.base.size() != cut || view.head.size() != schema.total_len() - cut)
    throw IntegrityError("merge: base/head lengths " + std::to_string(view.base.size()) + "/" +
                         std::to_string(view.head.size()) + " do not match schema split at " +
                         std::to_string(cut));
  ParamVector out;
  out.values.reserve(schema.total_len());
  out.values.insert(out.values.end(), view.base.values.begin(), view.base.values.end());
  out.values.insert(out.values.end(), view.head.values.begin(), view.head.values.end());
  return out;
}

std::size_t count_transmitted(const LayerSchema& schema, std::size_t nhead) {
  return schema.head_offset(nhead);
}

ParamVector linear_combination(std::span<const double> weights,
                               std::span<const ParamVector> vectors) {
  if (vectors.empty()) throw IntegrityError("linear_combination: no vectors");
  if (weights.size() != vectors.size())
    throw IntegrityError("linear_combination: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(vectors.size()) + " vectors");
  const std::size_t n = vectors.front().size();
  ParamVector out = ParamVector::zeros(n);
  for (std::size_t j = 0; j < vectors.size(); ++j) {
    if (vectors[j].size() != n)
      throw IntegrityError("linear_combination: vector " + std::to_string(j) + " has length " +
                           std::to_string(vectors[j].size()) + ", expected " + std::to_string(n));
    const double w = weights[j];
    const auto& v = vectors[j].values;
    for (std::size_t i = 0; i < n; ++i) out.values[i] += w * v[i];
  }
  return out;
}

void check_finite(const ParamVector& v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v.values[i]))
      throw IntegrityError(std::string(what) + ": non-finite value at index " + std::to_string(i));
}

}  // namespace fedsaf
