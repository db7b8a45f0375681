#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fedsaf/aggregation.hpp"
#include "fedsaf/client.hpp"
#include "fedsaf/server.hpp"

namespace fedsaf {

enum class DataSource { synthetic, fashion_mnist_idx, csv };

std::string to_string(DataSource source);
DataSource parse_data_source(std::string_view name);

struct DataConfig {
  DataSource source = DataSource::synthetic;
  std::string images;  // IDX image file
  std::string labels;  // IDX label file
  std::string csv;
  std::size_t limit = 0;  // keep the first N samples; 0 keeps all
  std::size_t num_classes = 10;
  std::size_t samples_per_class = 200;
  std::size_t dim = 16;
  double separation = 3.0;
  std::size_t clients = 5;
  std::size_t classes_per_client = 2;
  double unbalance = 0.0;
  double test_fraction = 0.3;
  bool iid = false;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct ExperimentConfig {
  DataConfig data;
  std::vector<std::size_t> hidden{32};
  LocalTrainConfig train;
  std::vector<int> stragglers;
  StrategyKind strategy = StrategyKind::fedsaf;
  double mu_prox = 0.01;
  bool use_fim = true;
  std::size_t nhead = 0;
  DistanceMetric dm = DistanceMetric::manhattan;
  double alpha = 0.1;
  double sigma = 1.0;
  std::size_t rounds = 30;
  std::uint64_t seed = 1;
  std::string output_dir = "fedsaf_out";

  /// Strategy flags implied by the config (split is on iff nhead > 0).
  Strategy make_strategy() const;
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct ConfigKeyInfo {
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every accepted dotted key with its default rendering.
std::vector<ConfigKeyInfo> config_keys();

/// Parses a JSON key-value tree. Nested objects and dotted keys are both
/// accepted; unknown keys and type mismatches raise ConfigError naming the key.
ExperimentConfig config_from_json_text(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies one `key=value` override. The value is read as JSON when it
/// parses, otherwise as a string.
void apply_override(ExperimentConfig& config, std::string_view assignment);
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Nested JSON rendering of the full resolved config.
std::string config_to_json_text(const ExperimentConfig& config);

}  // namespace fedsaf
