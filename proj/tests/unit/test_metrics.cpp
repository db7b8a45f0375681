#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "../oracles.hpp"
#include "fedsaf/errors.hpp"
#include "fedsaf/metrics.hpp"

using namespace fedsaf;

TEST_CASE("mean_std uses the population deviation") {
  auto r = mean_std(std::vector<double>{0.5});
  CHECK(r.mean == 0.5);
  CHECK(r.std == 0.0);
  r = mean_std(std::vector<double>{0.0, 1.0});
  CHECK(r.mean == 0.5);
  CHECK(r.std == 0.5);
  CHECK(mean_std(std::vector<double>(7, 0.3)).std == doctest::Approx(0.0));
  CHECK_THROWS_AS(mean_std(std::vector<double>{}), IntegrityError);

  std::vector<double> xs{0.1, 0.9, 0.4, 0.7, 0.2};
  const auto a = mean_std(xs);
  std::reverse(xs.begin(), xs.end());
  const auto b = mean_std(xs);
  CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-15));
  CHECK(a.std == doctest::Approx(b.std).epsilon(1e-15));
}

TEST_CASE("auc_score basics") {
  const std::vector<int> labels{0, 0, 1, 1};
  CHECK(*auc_score(std::vector<double>{0.1, 0.2, 0.8, 0.9}, labels) == 1.0);
  CHECK(*auc_score(std::vector<double>{0.9, 0.8, 0.2, 0.1}, labels) == 0.0);
  CHECK(*auc_score(std::vector<double>{0.5, 0.5, 0.5, 0.5}, labels) == 0.5);
  CHECK_FALSE(auc_score(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}).has_value());
  CHECK_FALSE(auc_score(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0}).has_value());
}

TEST_CASE("auc_score matches the all-pairs oracle and is rank invariant") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> coarse(0, 9);  // forces ties
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> s(50);
    std::vector<int> y(50);
    for (std::size_t i = 0; i < 50; ++i) {
      s[i] = coarse(rng) / 10.0;
      y[i] = static_cast<int>(i % 3 == 0);
    }
    const double auc = *auc_score(s, y);
    CHECK(auc == oracle::all_pairs_auc(s, y));

    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
    CHECK(*auc_score(t, y) == auc);
  }
}

TEST_CASE("macro_auc skips absent classes") {
  // three classes, class 2 never appears
  const std::vector<double> probs{0.8, 0.1, 0.1,  //
                                  0.2, 0.7, 0.1,  //
                                  0.6, 0.3, 0.1,  //
                                  0.1, 0.8, 0.1};
  const std::vector<int> labels{0, 1, 0, 1};
  CHECK(*macro_auc(probs, 3, labels) == 1.0);
  CHECK_FALSE(macro_auc(std::vector<double>{0.5, 0.5}, 2, std::vector<int>{1}).has_value());
}

namespace {
MetricsLog sample_log(std::size_t rounds) {
  MetricsLog log;
  std::size_t cum = 0;
  for (std::size_t k = 0; k < rounds; ++k) {
    const std::vector<double> loss{1.0 / (k + 1), 2.0 / (k + 1)};
    const std::vector<double> acc{0.1234567 * k / rounds, 0.5};
    std::vector<std::optional<double>> auc{0.61, std::nullopt};
    if (k == 0) auc = {std::nullopt, std::nullopt};
    log.rows.push_back(make_row(k, loss, acc, auc, k ? 10 : 0, cum));
    cum = log.rows.back().cumulative_uplink_scalars;
  }
  return log;
}
}  // namespace

TEST_CASE("make_row excludes undefined AUC") {
  const MetricsLog log = sample_log(3);
  CHECK_FALSE(log.rows[0].avg_test_auc.has_value());
  CHECK(*log.rows[1].avg_test_auc == 0.61);
  CHECK(*log.rows[1].std_test_auc == 0.0);
  CHECK(log.rows[2].cumulative_uplink_scalars == 20);
}

TEST_CASE("csv export") {
  const auto dir = std::filesystem::temp_directory_path() / "fedsaf_metrics_test";
  std::filesystem::create_directories(dir);

  export_csv(MetricsLog{}, dir / "empty.csv");
  std::ifstream empty(dir / "empty.csv");
  std::string line;
  int n = 0;
  while (std::getline(empty, line)) ++n;
  CHECK(n == 1);

  const MetricsLog log = sample_log(2);
  export_csv(log, dir / "two.csv");
  std::ifstream two(dir / "two.csv");
  n = 0;
  while (std::getline(two, line)) ++n;
  CHECK(n == 3);

  const auto rows = read_csv(dir / "two.csv");
  REQUIRE(rows.size() == 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].round == log.rows[i].round);
    CHECK(std::abs(rows[i].avg_test_acc - log.rows[i].avg_test_acc) <= 5e-7);
    CHECK(std::abs(rows[i].avg_train_loss - log.rows[i].avg_train_loss) <= 5e-7);
    CHECK(rows[i].avg_test_auc.has_value() == log.rows[i].avg_test_auc.has_value());
    CHECK(rows[i].per_client_acc.size() == 2);
  }
  // re-exporting the parsed rows reproduces the file byte for byte
  MetricsLog reparsed;
  reparsed.rows = rows;
  CHECK(format_csv(reparsed) == format_csv(log));
  CHECK(format_csv(log) == format_csv(log));

  CHECK_THROWS_AS(export_csv(log, dir / "missing" / "x.csv"), IoError);
}
