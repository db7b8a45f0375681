#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedsaf {

/// Flat, ordered model parameters. Layout is governed by a LayerSchema:
/// layers in forward-pass order, each weight matrix row-major with rows
/// indexed by output unit, followed by that layer's bias.
struct ParamVector {
  std::vector<double> values;

  ParamVector() = default;
  explicit ParamVector(std::vector<double> v) : values(std::move(v)) {}
  static ParamVector zeros(std::size_t n) { return ParamVector(std::vector<double>(n, 0.0)); }

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<const double> view() const { return values; }
  std::span<double> view() { return values; }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

/// One schema layer: a weight matrix together with its bias.
struct LayerDesc {
  int layer_id = 0;
  std::vector<std::size_t> shape;  // {out, in}
  std::size_t offset = 0;
  std::size_t length = 0;          // out * in + out

  friend bool operator==(const LayerDesc&, const LayerDesc&) = default;
};

class LayerSchema {
 public:
  LayerSchema() = default;
  /// Builds contiguous offsets from the given {out, in} shapes.
  explicit LayerSchema(const std::vector<std::vector<std::size_t>>& shapes);

  const std::vector<LayerDesc>& layers() const { return layers_; }
  std::size_t layer_count() const { return layers_.size(); }
  std::size_t total_len() const { return total_len_; }

  /// First index of the head segment when the last `nhead` layers are kept local.
  std::size_t head_offset(std::size_t nhead) const;

  friend bool operator==(const LayerSchema&, const LayerSchema&) = default;

 private:
  std::vector<LayerDesc> layers_;
  std::size_t total_len_ = 0;
};

/// Model split into the shared base (uploaded) and the personalized head.
struct SplitView {
  ParamVector head;
  ParamVector base;
  std::size_t nhead = 0;
};

SplitView split(const ParamVector& params, const LayerSchema& schema, std::size_t nhead);
ParamVector merge(const SplitView& view, const LayerSchema& schema);

/// Scalars in the base segment, i.e. one client's uplink payload per round.
std::size_t count_transmitted(const LayerSchema& schema, std::size_t nhead);

/// Element-wise sum of weights[j] * vectors[j]. No normalization.
ParamVector linear_combination(std::span<const double> weights,
                               std::span<const ParamVector> vectors);

/// Throws IntegrityError unless every entry is finite.
void check_finite(const ParamVector& v, const char* what);

}  // namespace fedsaf
