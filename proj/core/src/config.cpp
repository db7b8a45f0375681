#include "fedsaf/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "fedsaf/errors.hpp"

namespace fedsaf {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string to_string(DataSource source) {
  switch (source) {
    case DataSource::synthetic: return "synthetic";
    case DataSource::fashion_mnist_idx: return "fashion_mnist_idx";
    case DataSource::csv: return "csv";
  }
  return "?";
}

DataSource parse_data_source(std::string_view name) {
  if (name == "synthetic") return DataSource::synthetic;
  if (name == "fashion_mnist_idx") return DataSource::fashion_mnist_idx;
  if (name == "csv") return DataSource::csv;
  throw ConfigError("data.source: unknown value '" + std::string(name) +
                    "'; valid options are {synthetic, fashion_mnist_idx, csv}");
}

namespace {

struct KeyDef {
  std::string key;
  std::string help;
  std::function<void(ExperimentConfig&, const json&)> set;
  std::function<ordered_json(const ExperimentConfig&)> get;
};

[[noreturn]] void type_error(const std::string& key, const char* expected) {
  throw ConfigError("config key '" + key + "': expected " + expected);
}

std::size_t as_count(const std::string& key, const json& v) {
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0))
    type_error(key, "a non-negative integer");
  return v.get<std::size_t>();
}

double as_real(const std::string& key, const json& v) {
  if (!v.is_number()) type_error(key, "a number");
  return v.get<double>();
}

bool as_bool(const std::string& key, const json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string() && (v == "true" || v == "false")) return v == "true";
  type_error(key, "a boolean");
}

std::string as_text(const std::string& key, const json& v) {
  if (!v.is_string()) type_error(key, "a string");
  return v.get<std::string>();
}

// Accepts a JSON array of integers or a comma-separated string ("32,16").
template <class T>
std::vector<T> as_list(const std::string& key, const json& v) {
  std::vector<T> out;
  if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number_integer()) type_error(key, "a list of integers");
      out.push_back(e.get<T>());
    }
    return out;
  }
  if (v.is_number_integer()) return {v.get<T>()};
  if (!v.is_string()) type_error(key, "a list of integers");
  std::istringstream in(v.get<std::string>());
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const long long x = std::stoll(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(x));
    } catch (const std::exception&) {
      type_error(key, "a list of integers");
    }
  }
  return out;
}

#define COUNT_KEY(name, field, help)                                                  \
  KeyDef{name, help, [](ExperimentConfig& c, const json& v) { c.field = as_count(name, v); }, \
         [](const ExperimentConfig& c) { return ordered_json(c.field); }}
#define REAL_KEY(name, field, help)                                                   \
  KeyDef{name, help, [](ExperimentConfig& c, const json& v) { c.field = as_real(name, v); }, \
         [](const ExperimentConfig& c) { return ordered_json(c.field); }}
#define BOOL_KEY(name, field, help)                                                   \
  KeyDef{name, help, [](ExperimentConfig& c, const json& v) { c.field = as_bool(name, v); }, \
         [](const ExperimentConfig& c) { return ordered_json(c.field); }}
#define TEXT_KEY(name, field, help)                                                   \
  KeyDef{name, help, [](ExperimentConfig& c, const json& v) { c.field = as_text(name, v); }, \
         [](const ExperimentConfig& c) { return ordered_json(c.field); }}

const std::vector<KeyDef>& registry() {
  static const std::vector<KeyDef> keys = {
      KeyDef{"data.source", "synthetic | fashion_mnist_idx | csv",
             [](ExperimentConfig& c, const json& v) { c.data.source = parse_data_source(as_text("data.source", v)); },
             [](const ExperimentConfig& c) { return ordered_json(to_string(c.data.source)); }},
      TEXT_KEY("data.images", data.images, "IDX image file (fashion_mnist_idx)"),
      TEXT_KEY("data.labels", data.labels, "IDX label file (fashion_mnist_idx)"),
      TEXT_KEY("data.csv", data.csv, "CSV file, last column is the label (csv)"),
      COUNT_KEY("data.limit", data.limit, "keep only the first N samples (0 = all)"),
      COUNT_KEY("data.num_classes", data.num_classes, "synthetic: number of classes"),
      COUNT_KEY("data.samples_per_class", data.samples_per_class, "synthetic: samples per class"),
      COUNT_KEY("data.dim", data.dim, "synthetic: feature dimension"),
      REAL_KEY("data.separation", data.separation, "synthetic: radius of the class-mean sphere"),
      COUNT_KEY("data.clients", data.clients, "number of clients m"),
      COUNT_KEY("data.classes_per_client", data.classes_per_client, "classes per client S"),
      REAL_KEY("data.unbalance", data.unbalance, "client size exponent: size ~ (rank+1)^unbalance"),
      REAL_KEY("data.test_fraction", data.test_fraction, "per-client stratified test share"),
      BOOL_KEY("data.iid", data.iid, "stratified IID shards instead of label skew"),
      KeyDef{"model.hidden", "hidden layer widths, e.g. [32] or \"64,32\"; [] = logistic",
             [](ExperimentConfig& c, const json& v) { c.hidden = as_list<std::size_t>("model.hidden", v); },
             [](const ExperimentConfig& c) { return ordered_json(c.hidden); }},
      REAL_KEY("train.lr", train.lr, "learning rate"),
      COUNT_KEY("train.local_epochs", train.local_epochs, "local epochs (head epochs when split)"),
      COUNT_KEY("train.batch_size", train.batch_size, "minibatch size"),
      REAL_KEY("train.lambda", train.lambda, "proximal regularization weight lambda"),
      REAL_KEY("train.alpha_k", train.alpha_k, "proximal denominator alpha_K"),
      COUNT_KEY("train.prox_steps", train.prox_steps, "epochs on the proximal objective"),
      COUNT_KEY("train.straggler_epochs", train.straggler_epochs, "local epochs of straggler clients"),
      KeyDef{"train.stragglers", "straggler client ids, e.g. [0] or \"0,3\"",
             [](ExperimentConfig& c, const json& v) { c.stragglers = as_list<int>("train.stragglers", v); },
             [](const ExperimentConfig& c) { return ordered_json(c.stragglers); }},
      BOOL_KEY("fim.enabled", use_fim, "tFIM-weighted second aggregation stage"),
      COUNT_KEY("fim.batch", train.tfim_batch, "minibatch size for the tFIM estimate"),
      COUNT_KEY("split.nhead", nhead, "deepest layers kept local (0 = no splitting)"),
      KeyDef{"amp.dm", "distance metric: euclidean | manhattan | cosine",
             [](ExperimentConfig& c, const json& v) { c.dm = parse_metric(as_text("amp.dm", v)); },
             [](const ExperimentConfig& c) { return ordered_json(to_string(c.dm)); }},
      REAL_KEY("amp.alpha", alpha, "AMP scaling factor alpha"),
      REAL_KEY("amp.sigma", sigma, "attention bandwidth sigma"),
      KeyDef{"strategy.name", "fedsaf | fedavg | fedprox | fedamp | fedrep",
             [](ExperimentConfig& c, const json& v) { c.strategy = parse_strategy(as_text("strategy.name", v)); },
             [](const ExperimentConfig& c) { return ordered_json(to_string(c.strategy)); }},
      REAL_KEY("strategy.mu_prox", mu_prox, "FedProx proximal coefficient mu"),
      COUNT_KEY("run.rounds", rounds, "communication rounds K"),
      KeyDef{"run.seed", "master seed",
             [](ExperimentConfig& c, const json& v) { c.seed = as_count("run.seed", v); },
             [](const ExperimentConfig& c) { return ordered_json(c.seed); }},
      TEXT_KEY("run.output_dir", output_dir, "output directory (env FEDSAF_OUTPUT_DIR overrides)"),
  };
  return keys;
}

#undef COUNT_KEY
#undef REAL_KEY
#undef BOOL_KEY
#undef TEXT_KEY

const KeyDef& find_key(std::string_view key) {
  for (const auto& k : registry())
    if (k.key == key) return k;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void flatten(const json& node, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      flatten(*it, key, out);
    else
      out.emplace_back(key, *it);
  }
}

void set_key(ExperimentConfig& c, const std::string& key, const json& value) {
  const KeyDef& def = find_key(key);
  try {
    def.set(c, value);
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "': value out of range or wrong type");
  }
}

}  // namespace

std::vector<ConfigKeyInfo> config_keys() {
  const ExperimentConfig defaults;
  std::vector<ConfigKeyInfo> out;
  for (const auto& k : registry()) out.push_back({k.key, k.get(defaults).dump(), k.help});
  return out;
}

ExperimentConfig config_from_json_text(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  std::vector<std::pair<std::string, json>> entries;
  flatten(root, "", entries);
  ExperimentConfig c;
  for (const auto& [key, value] : entries) set_key(c, key, value);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str());
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = std::string(value);
  }
  set_key(config, std::string(key), parsed);
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override '" + std::string(assignment) + "' must look like key=value");
  set_config_value(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::string config_to_json_text(const ExperimentConfig& config) {
  ordered_json root = ordered_json::object();
  for (const auto& k : registry()) {
    const auto dot = k.key.find('.');
    root[k.key.substr(0, dot)][k.key.substr(dot + 1)] = k.get(config);
  }
  return root.dump(2) + "\n";
}

Strategy ExperimentConfig::make_strategy() const {
  Strategy s = Strategy::make(strategy, use_fim, nhead > 0);
  s.metric = dm;
  s.alpha = alpha;
  s.sigma = sigma;
  s.mu_prox = mu_prox;
  return s;
}

void ExperimentConfig::validate() const {
  if (data.clients == 0) throw ConfigError("data.clients must be positive");
  if (data.source == DataSource::synthetic) {
    if (data.num_classes < 2) throw ConfigError("data.num_classes must be >= 2");
    if (data.samples_per_class == 0) throw ConfigError("data.samples_per_class must be positive");
    if (data.dim == 0) throw ConfigError("data.dim must be positive");
    if (data.separation < 0.0) throw ConfigError("data.separation must be >= 0");
    if (!data.iid && data.classes_per_client > data.num_classes)
      throw ConfigError("data.classes_per_client must be <= data.num_classes");
  }
  if (data.source == DataSource::fashion_mnist_idx && (data.images.empty() || data.labels.empty()))
    throw ConfigError("data.images and data.labels are required for fashion_mnist_idx");
  if (data.source == DataSource::csv && data.csv.empty())
    throw ConfigError("data.csv is required for the csv source");
  if (!data.iid && data.classes_per_client == 0)
    throw ConfigError("data.classes_per_client must be positive");
  if (data.unbalance < 0.0) throw ConfigError("data.unbalance must be >= 0");
  if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0))
    throw ConfigError("data.test_fraction must lie in (0, 1)");
  for (auto h : hidden)
    if (h == 0) throw ConfigError("model.hidden widths must be positive");
  train.validate();
  for (int id : stragglers)
    if (id < 0 || static_cast<std::size_t>(id) >= data.clients)
      throw ConfigError("train.stragglers: client id " + std::to_string(id) + " outside [0, " +
                        std::to_string(data.clients) + ")");
  if (nhead > hidden.size() + 1)
    throw ConfigError("split.nhead=" + std::to_string(nhead) + " exceeds the model's " +
                      std::to_string(hidden.size() + 1) + " layers");
  if (!(sigma > 0.0)) throw ConfigError("amp.sigma must be > 0");
  if (!(alpha >= 0.0)) throw ConfigError("amp.alpha must be >= 0");
  if (!(mu_prox >= 0.0)) throw ConfigError("strategy.mu_prox must be >= 0");
  const bool split_strategy = strategy == StrategyKind::fedsaf || strategy == StrategyKind::fedrep;
  if (!split_strategy && nhead > 0)
    throw ConfigError("split.nhead must be 0 for strategy " + to_string(strategy));
  if (strategy == StrategyKind::fedrep && nhead == 0)
    throw ConfigError("strategy fedrep requires split.nhead >= 1");
  make_strategy().validate();
}

}  // namespace fedsaf
