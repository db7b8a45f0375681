#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "fedsaf/config.hpp"
#include "fedsaf/metrics.hpp"

namespace fedsaf::cli {

/// Writes metrics.csv, summary.json and config.json for one run into `dir`.
void write_run_outputs(const ExperimentConfig& config, const MetricsLog& log,
                       const std::string& label, const std::filesystem::path& dir);

int cmd_run(const ExperimentConfig& config, std::size_t threads, std::ostream& out);

/// {FIM on/off} x {split on/off} grid on shared data; writes ablation.csv.
int cmd_ablate(const ExperimentConfig& config, std::size_t threads, std::ostream& out);

/// One run per value of `parameter` (nhead or dm); writes sweep.csv.
int cmd_sweep(const ExperimentConfig& config, const std::string& parameter,
              const std::vector<std::string>& values, std::size_t threads, std::ostream& out);

/// Entry point shared by the binary and the tests. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fedsaf::cli
