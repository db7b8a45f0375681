#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fedsaf {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

MeanStd mean_std(std::span<const double> xs);

/// Rank-based (Mann-Whitney) AUC with midranks for ties. Returns nullopt when
/// only one class is present, since AUC is undefined there.
std::optional<double> auc_score(std::span<const double> scores, std::span<const int> labels);

/// Macro-averaged one-vs-rest AUC. `probs` is row-major n x num_classes.
/// Classes absent from `labels` are skipped; nullopt if none qualify.
std::optional<double> macro_auc(std::span<const double> probs, std::size_t num_classes,
                                std::span<const int> labels);

/// One row per communication round (round 0 = initial model).
struct MetricsRow {
  std::size_t round = 0;
  double avg_train_loss = 0.0;
  double avg_test_acc = 0.0;
  double std_test_acc = 0.0;
  std::optional<double> avg_test_auc;
  std::optional<double> std_test_auc;
  std::size_t uplink_scalars = 0;
  std::size_t cumulative_uplink_scalars = 0;
  std::vector<double> per_client_acc;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

struct MetricsLog {
  std::vector<MetricsRow> rows;
  /// Second-stage aggregation weights per round, indexed [round-1][client].
  std::vector<std::vector<double>> gamma_history;
  std::size_t transmitted_per_client = 0;
};

/// Builds a row from per-client results; clients with undefined AUC are
/// excluded from the AUC aggregate.
MetricsRow make_row(std::size_t round, std::span<const double> train_loss,
                    std::span<const double> test_acc,
                    std::span<const std::optional<double>> test_auc,
                    std::size_t uplink_scalars, std::size_t cumulative_before);

/// Index of the row with the highest averaged test accuracy (first on ties).
std::size_t best_round(const MetricsLog& log);

std::string csv_header();
std::string format_csv(const MetricsLog& log);
void export_csv(const MetricsLog& log, const std::filesystem::path& path);
/// Parses a file written by export_csv (values come back rounded).
std::vector<MetricsRow> read_csv(const std::filesystem::path& path);

/// Final-round and best-round metrics plus the gamma history.
void export_summary_json(const MetricsLog& log, const std::string& label,
                         const std::filesystem::path& path);

}  // namespace fedsaf
