#include "fedsaf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fedsaf/errors.hpp"

namespace fedsaf {

MeanStd mean_std(std::span<const double> xs) {
  if (xs.empty()) throw IntegrityError("mean_std: empty sequence");
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

std::optional<double> auc_score(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw IntegrityError("auc_score: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    // ranks are 1-based; tied block [i, j] shares the mean rank
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] != 0) {
        rank_sum += midrank;
        ++n_pos;
      }
    i = j + 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

std::optional<double> macro_auc(std::span<const double> probs, std::size_t num_classes,
                                std::span<const int> labels) {
  if (probs.size() != labels.size() * num_classes)
    throw IntegrityError("macro_auc: probability matrix does not match labels");
  const std::size_t n = labels.size();
  std::vector<double> scores(n);
  std::vector<int> onevsrest(n);
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t r = 0; r < n; ++r) {
      scores[r] = probs[r * num_classes + c];
      onevsrest[r] = labels[r] == static_cast<int>(c) ? 1 : 0;
    }
    if (std::find(onevsrest.begin(), onevsrest.end(), 1) == onevsrest.end()) continue;
    if (auto a = auc_score(scores, onevsrest)) {
      total += *a;
      ++used;
    }
  }
  if (used == 0) return std::nullopt;
  return total / static_cast<double>(used);
}

MetricsRow make_row(std::size_t round, std::span<const double> train_loss,
                    std::span<const double> test_acc,
                    std::span<const std::optional<double>> test_auc,
                    std::size_t uplink_scalars, std::size_t cumulative_before) {
  MetricsRow row;
  row.round = round;
  row.avg_train_loss = mean_std(train_loss).mean;
  const auto acc = mean_std(test_acc);
  row.avg_test_acc = acc.mean;
  row.std_test_acc = acc.std;
  std::vector<double> aucs;
  for (const auto& a : test_auc)
    if (a) aucs.push_back(*a);
  if (!aucs.empty()) {
    const auto auc = mean_std(aucs);
    row.avg_test_auc = auc.mean;
    row.std_test_auc = auc.std;
  }
  row.uplink_scalars = uplink_scalars;
  row.cumulative_uplink_scalars = cumulative_before + uplink_scalars;
  row.per_client_acc.assign(test_acc.begin(), test_acc.end());
  return row;
}

std::size_t best_round(const MetricsLog& log) {
  if (log.rows.empty()) throw IntegrityError("best_round: empty log");
  std::size_t best = 0;
  for (std::size_t i = 1; i < log.rows.size(); ++i)
    if (log.rows[i].avg_test_acc > log.rows[best].avg_test_acc) best = i;
  return best;
}

namespace {

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string fixed6(const std::optional<double>& x) { return x ? fixed6(*x) : std::string("NA"); }

std::optional<double> parse_optional(const std::string& s) {
  if (s == "NA") return std::nullopt;
  return std::stod(s);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::string csv_header() {
  return "round,avg_train_loss,avg_test_acc,std_test_acc,avg_test_auc,std_test_auc,"
         "uplink_scalars,cumulative_uplink_scalars,per_client_acc";
}

std::string format_csv(const MetricsLog& log) {
  std::string out = csv_header() + "\n";
  for (const auto& r : log.rows) {
    std::string per_client;
    for (std::size_t i = 0; i < r.per_client_acc.size(); ++i) {
      if (i) per_client += ';';
      per_client += fixed6(r.per_client_acc[i]);
    }
    out += std::to_string(r.round) + ',' + fixed6(r.avg_train_loss) + ',' + fixed6(r.avg_test_acc) +
           ',' + fixed6(r.std_test_acc) + ',' + fixed6(r.avg_test_auc) + ',' +
           fixed6(r.std_test_auc) + ',' + std::to_string(r.uplink_scalars) + ',' +
           std::to_string(r.cumulative_uplink_scalars) + ',' + per_client + '\n';
  }
  return out;
}

void export_csv(const MetricsLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << format_csv(log);
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

std::vector<MetricsRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != csv_header())
    throw FormatError(path.string() + ": missing or unexpected header");
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = split_on(line, ',');
    if (f.size() != 9)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 9 fields");
    MetricsRow r;
    r.round = std::stoull(f[0]);
    r.avg_train_loss = std::stod(f[1]);
    r.avg_test_acc = std::stod(f[2]);
    r.std_test_acc = std::stod(f[3]);
    r.avg_test_auc = parse_optional(f[4]);
    r.std_test_auc = parse_optional(f[5]);
    r.uplink_scalars = std::stoull(f[6]);
    r.cumulative_uplink_scalars = std::stoull(f[7]);
    if (!f[8].empty())
      for (const auto& a : split_on(f[8], ';')) r.per_client_acc.push_back(std::stod(a));
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

nlohmann::ordered_json row_json(const MetricsRow& r) {
  nlohmann::ordered_json j;
  j["round"] = r.round;
  j["avg_train_loss"] = r.avg_train_loss;
  j["avg_test_acc"] = r.avg_test_acc;
  j["std_test_acc"] = r.std_test_acc;
  j["avg_test_auc"] = r.avg_test_auc ? nlohmann::ordered_json(*r.avg_test_auc) : nullptr;
  j["std_test_auc"] = r.std_test_auc ? nlohmann::ordered_json(*r.std_test_auc) : nullptr;
  j["uplink_scalars"] = r.uplink_scalars;
  j["cumulative_uplink_scalars"] = r.cumulative_uplink_scalars;
  return j;
}

}  // namespace

void export_summary_json(const MetricsLog& log, const std::string& label,
                         const std::filesystem::path& path) {
  if (log.rows.empty()) throw IntegrityError("export_summary_json: empty log");
  nlohmann::ordered_json j;
  j["label"] = label;
  j["rounds"] = log.rows.back().round;
  j["transmitted_per_client_per_round"] = log.transmitted_per_client;
  j["final"] = row_json(log.rows.back());
  // best averaged test accuracy over all rounds, including round 0
  j["best_accuracy"] = row_json(log.rows[best_round(log)]);
  j["gamma_history"] = log.gamma_history;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

}  // namespace fedsaf
