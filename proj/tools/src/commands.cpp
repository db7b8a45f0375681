#include "fedsaf_cli/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "fedsaf/errors.hpp"
#include "fedsaf/server.hpp"

namespace fedsaf::cli {

namespace {

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string fixed6(const std::optional<double>& x) { return x ? fixed6(*x) : std::string("NA"); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

struct Variant {
  std::string label;
  ExperimentConfig config;
};

// One comparison-table row built from a finished run.
std::string table_fields(const MetricsLog& log) {
  const MetricsRow& last = log.rows.back();
  return fixed6(last.avg_train_loss) + ',' + fixed6(last.avg_test_acc) + ',' +
         fixed6(last.std_test_acc) + ',' + fixed6(last.avg_test_auc) + ',' +
         fixed6(last.std_test_auc) + ',' + fixed6(log.rows[best_round(log)].avg_test_acc) + ',' +
         std::to_string(log.transmitted_per_client);
}

constexpr const char* kTableColumns =
    "train_loss,avg_test_acc,std_test_acc,avg_test_auc,std_test_auc,best_avg_test_acc,"
    "transmitted_per_client";

void print_final(std::ostream& out, const std::string& label, const MetricsLog& log) {
  const MetricsRow& last = log.rows.back();
  out << std::left << std::setw(24) << label << " round " << last.round << "  acc "
      << fixed6(last.avg_test_acc) << " +/- " << fixed6(last.std_test_acc) << "  auc "
      << fixed6(last.avg_test_auc) << "  loss " << fixed6(last.avg_train_loss)
      << "  uplink/client " << log.transmitted_per_client << '\n';
}

}  // namespace

void write_run_outputs(const ExperimentConfig& config, const MetricsLog& log,
                       const std::string& label, const std::filesystem::path& dir) {
  ensure_dir(dir);
  export_csv(log, dir / "metrics.csv");
  export_summary_json(log, label, dir / "summary.json");
  write_text(dir / "config.json", config_to_json_text(config));
}

int cmd_run(const ExperimentConfig& config, std::size_t threads, std::ostream& out) {
  config.validate();
  const MetricsLog log = run_experiment(config, threads);
  write_run_outputs(config, log, to_string(config.strategy), config.output_dir);
  print_final(out, to_string(config.strategy), log);
  return 0;
}

int cmd_ablate(const ExperimentConfig& config, std::size_t threads, std::ostream& out) {
  ExperimentConfig base = config;
  base.strategy = StrategyKind::fedsaf;
  base.validate();
  const std::size_t split_nhead = base.nhead > 0 ? base.nhead : 1;

  std::vector<Variant> grid;
  for (bool fim : {true, false})
    for (bool split : {true, false}) {
      Variant v;
      v.label = std::string("fim_") + (fim ? "on" : "off") + "_split_" + (split ? "on" : "off");
      v.config = base;
      v.config.use_fim = fim;
      v.config.nhead = split ? split_nhead : 0;
      v.config.output_dir = (std::filesystem::path(base.output_dir) / v.label).string();
      v.config.validate();
      grid.push_back(std::move(v));
    }

  std::string table = std::string("variant,use_fim,use_split,nhead,") + kTableColumns + "\n";
  for (const auto& v : grid) {
    const MetricsLog log = run_experiment(v.config, threads);
    write_run_outputs(v.config, log, v.label, v.config.output_dir);
    print_final(out, v.label, log);
    table += v.label + ',' + (v.config.use_fim ? "1" : "0") + ',' + (v.config.nhead > 0 ? "1" : "0") +
             ',' + std::to_string(v.config.nhead) + ',' + table_fields(log) + '\n';
  }
  ensure_dir(base.output_dir);
  write_text(std::filesystem::path(base.output_dir) / "ablation.csv", table);
  return 0;
}

int cmd_sweep(const ExperimentConfig& config, const std::string& parameter,
              const std::vector<std::string>& values, std::size_t threads, std::ostream& out) {
  if (parameter != "nhead" && parameter != "dm")
    throw ConfigError("sweep: parameter must be one of {nhead, dm}, got '" + parameter + "'");
  if (values.empty()) throw ConfigError("sweep: empty value list");

  // validate every value before running anything
  std::vector<Variant> runs;
  for (const auto& value : values) {
    Variant v;
    v.label = parameter + "_" + value;
    v.config = config;
    try {
      set_config_value(v.config, parameter == "nhead" ? "split.nhead" : "amp.dm", value);
      if (parameter == "nhead") {
        // a string that is not an integer would have been stored as text and rejected
        std::size_t used = 0;
        (void)std::stoul(value, &used);
        if (used != value.size()) throw ConfigError("not an integer");
      }
      v.config.output_dir = (std::filesystem::path(config.output_dir) / v.label).string();
      v.config.validate();
    } catch (const std::exception& e) {
      throw ConfigError("sweep: invalid value '" + value + "' for " + parameter + ": " + e.what());
    }
    runs.push_back(std::move(v));
  }

  std::string table = std::string("parameter,value,") + kTableColumns + "\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const MetricsLog log = run_experiment(runs[i].config, threads);
    write_run_outputs(runs[i].config, log, runs[i].label, runs[i].config.output_dir);
    print_final(out, runs[i].label, log);
    table += parameter + ',' + values[i] + ',' + table_fields(log) + '\n';
  }
  ensure_dir(config.output_dir);
  write_text(std::filesystem::path(config.output_dir) / "sweep.csv", table);
  return 0;
}

namespace {

std::string keys_footer() {
  std::ostringstream os;
  os << "\nConfig keys (JSON file, --set key=value; flags win over the file):\n";
  for (const auto& k : config_keys())
    os << "  " << std::left << std::setw(26) << k.key << std::setw(14) << k.default_value << k.help
       << '\n';
  os << "\nFEDSAF_OUTPUT_DIR overrides run.output_dir from the file; --output-dir wins over both.\n";
  return os.str();
}

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::size_t> nhead;
  std::optional<std::string> dm;
  std::optional<std::string> strategy;
  std::optional<std::size_t> rounds;
  std::optional<std::size_t> clients;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::size_t threads = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON config file");
  cmd->add_option("--set", o.overrides, "override a config key: key=value (repeatable)");
  cmd->add_option("--nhead", o.nhead, "split.nhead");
  cmd->add_option("--dm", o.dm, "amp.dm");
  cmd->add_option("--strategy", o.strategy, "strategy.name");
  cmd->add_option("-K,--rounds", o.rounds, "run.rounds");
  cmd->add_option("-m,--clients", o.clients, "data.clients");
  cmd->add_option("--seed", o.seed, "run.seed");
  cmd->add_option("-o,--output-dir", o.output_dir, "run.output_dir");
  cmd->add_option("--threads", o.threads, "client worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (const char* env = std::getenv("FEDSAF_OUTPUT_DIR"); env && *env) c.output_dir = env;
  for (const auto& a : o.overrides) apply_override(c, a);
  if (o.nhead) c.nhead = *o.nhead;
  if (o.dm) c.dm = parse_metric(*o.dm);
  if (o.strategy) c.strategy = parse_strategy(*o.strategy);
  if (o.rounds) c.rounds = *o.rounds;
  if (o.clients) c.data.clients = *o.clients;
  if (o.seed) c.seed = *o.seed;
  if (o.output_dir) c.output_dir = *o.output_dir;
  c.validate();
  return c;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated learning simulator: model splitting, attentive message passing and "
               "Fisher-information weighted aggregation, with FedAvg/FedProx/FedAMP/FedRep baselines"};
  app.footer(keys_footer());
  app.require_subcommand(1);

  CommonOptions run_o, ablate_o, sweep_o, validate_o;
  auto* run = app.add_subcommand("run", "run one experiment");
  add_common(run, run_o);
  auto* ablate = app.add_subcommand("ablate", "FIM on/off x split on/off ablation grid");
  add_common(ablate, ablate_o);
  auto* sweep = app.add_subcommand("sweep", "one run per value of nhead or dm");
  add_common(sweep, sweep_o);
  std::string sweep_param;
  std::vector<std::string> sweep_values;
  sweep->add_option("--param", sweep_param, "nhead | dm")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")->delimiter(',')->required();
  auto* validate = app.add_subcommand("validate-config", "print the resolved config and exit");
  add_common(validate, validate_o);

  std::vector<char*> argv;
  std::vector<std::string> storage(args);
  for (auto& a : storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*run) {
      const auto c = resolve(run_o);
      return cmd_run(c, run_o.threads, out);
    }
    if (*ablate) {
      const auto c = resolve(ablate_o);
      return cmd_ablate(c, ablate_o.threads, out);
    }
    if (*sweep) {
      const auto c = resolve(sweep_o);
      return cmd_sweep(c, sweep_param, sweep_values, sweep_o.threads, out);
    }
    if (*validate) {
      out << config_to_json_text(resolve(validate_o));
      return 0;
    }
  } catch (const std::exception& e) {
    err << "fedsaf: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace fedsaf::cli
