#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fedsaf/model.hpp"

namespace fedsaf {

/// Features in [0,1] (one sample per row) with integer class labels.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::string name;

  std::size_t size() const { return labels.size(); }
  /// Copies the listed rows, in the given order.
  Dataset subset(std::span<const std::size_t> rows) const;
  Batch as_batch() const { return Batch{features, labels}; }
  void validate() const;
};

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are scaled by 1/255. `limit` > 0 keeps only the first `limit` items.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t limit = 0);

/// CSV with a header row; the last column is the integer label and the rest
/// are real features. Features are min-max rescaled per column to [0,1].
Dataset load_csv(const std::filesystem::path& path);

/// Gaussian blobs with unit variance around per-class means placed on a
/// sphere of radius `separation`, rescaled per feature to [0,1].
Dataset generate_synthetic(std::size_t num_classes, std::size_t samples_per_class, std::size_t dim,
                           double separation, std::uint64_t seed);

struct ClientData {
  Dataset train;
  Dataset test;
  // row indices into the source dataset
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> test_index;
  std::vector<int> classes;  // sorted label support assigned to this client
};

struct Partition {
  std::vector<ClientData> clients;
  std::size_t classes_per_client = 0;
  std::size_t client_count() const { return clients.size(); }
};

/// Label- and size-skewed split. Classes are shuffled and dealt S per client
/// round-robin; client i's total size is proportional to (i+1)^unbalance.
Partition partition_noniid(const Dataset& data, std::size_t m, std::size_t classes_per_client,
                           double unbalance, double test_fraction, std::uint64_t seed);

/// Stratified equal shards that preserve global class proportions.
Partition iid_partition(const Dataset& data, std::size_t m, double test_fraction,
                        std::uint64_t seed);

}  // namespace fedsaf
