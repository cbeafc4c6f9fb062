#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace evoprune::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T number(std::string_view key, std::string_view text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty())
    throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(text) + "'");
  return value;
}

std::size_t count(std::string_view key, std::string_view text) {
  return number<std::size_t>(key, text);
}

double real(std::string_view key, std::string_view text) {
  return number<double>(key, text);
}

void apply(RunConfig& cfg, std::string_view key, std::string_view value) {
  auto& ga = cfg.ga;
  if (key == "data") cfg.data_dir = std::string(value);
  else if (key == "out") cfg.out_dir = std::string(value);
  else if (key == "baseline") cfg.baseline = std::string(value);
  else if (key == "checkpoint") cfg.checkpoint = std::string(value);
  else if (key == "seed") cfg.seed = number<std::uint64_t>(key, value);
  else if (key == "split_seed") cfg.split_seed = number<std::uint64_t>(key, value);
  else if (key == "validation_size") cfg.validation_size = count(key, value);
  else if (key == "lambda1") ga.weights.lambda1 = real(key, value), cfg.lambda_given = true;
  else if (key == "lambda2") ga.weights.lambda2 = real(key, value), cfg.lambda_given = true;
  else if (key == "lambda3") ga.weights.lambda3 = real(key, value), cfg.lambda_given = true;
  else if (key == "population") ga.population = count(key, value);
  else if (key == "selected") ga.selected = count(key, value);
  else if (key == "crossover_rate") ga.crossover_rate = real(key, value);
  else if (key == "conv_mutation_rate") ga.conv_mutation_rate = real(key, value);
  else if (key == "fc_mutation_rate") ga.fc_mutation_rate = real(key, value);
  else if (key == "retrain_interval") ga.retrain_interval = count(key, value);
  else if (key == "generations") ga.max_generations = count(key, value);
  else if (key == "convergence_window") ga.convergence_window = count(key, value);
  else if (key == "convergence_threshold") ga.convergence_threshold = real(key, value);
  else if (key == "retrain_epochs") ga.retrain.epochs = count(key, value);
  else if (key == "retrain_samples") ga.retrain.samples_per_epoch = count(key, value);
  else if (key == "final_epochs") ga.final_train.epochs = count(key, value);
  else if (key == "pretrain_epochs") cfg.pretrain.epochs = count(key, value);
  else if (key == "batch_size") {
    cfg.pretrain.batch_size = ga.retrain.batch_size = ga.final_train.batch_size = count(key, value);
  } else if (key == "learning_rate") {
    cfg.pretrain.learning_rate = ga.retrain.learning_rate = ga.final_train.learning_rate =
        real(key, value);
  } else if (key == "momentum") {
    cfg.pretrain.momentum = ga.retrain.momentum = ga.final_train.momentum = real(key, value);
  } else if (key == "threads") ga.threads = count(key, value);
  else if (key == "preset") {
    // handled before the other keys
  } else {
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  }
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    kv.insert_or_assign(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_key_values(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = {
      {"balanced", {0.3, 0.4, 0.3}},
      {"speed", {0.5, 0.5, 0.0}},
      {"storage", {0.5, 0.0, 0.5}},
      {"accuracy", {0.8, 0.1, 0.1}},
  };
  return all;
}

const Preset* find_preset(std::string_view name) {
  for (const auto& p : presets())
    if (p.name == name) return &p;
  return nullptr;
}

const std::vector<std::string_view>& known_keys() {
  static const std::vector<std::string_view> keys = {
      "data", "out", "baseline", "checkpoint", "seed", "split_seed", "validation_size",
      "preset", "lambda1", "lambda2", "lambda3", "population", "selected", "crossover_rate",
      "conv_mutation_rate", "fc_mutation_rate", "retrain_interval", "generations",
      "convergence_window", "convergence_threshold", "retrain_epochs", "retrain_samples",
      "final_epochs", "pretrain_epochs", "batch_size", "learning_rate", "momentum", "threads"};
  return keys;
}

RunConfig build_config(const KeyValues& file, const KeyValues& overrides) {
  KeyValues merged = file;
  for (const auto& [k, v] : overrides) merged.insert_or_assign(k, v);

  RunConfig cfg;
  ep_train_config_default(&cfg.pretrain);
  ep_ga_config_default(&cfg.ga);

  if (auto it = merged.find("preset"); it != merged.end()) {
    const Preset* p = find_preset(it->second);
    if (p == nullptr) {
      std::string names;
      for (const auto& q : presets()) names += (names.empty() ? "" : ", ") + std::string(q.name);
      throw ConfigError("unknown preset '" + it->second + "' (choose one of " + names + ")");
    }
    cfg.ga.weights = p->weights;
    cfg.lambda_given = true;
  }
  for (const auto& [k, v] : merged) apply(cfg, k, v);

  cfg.pretrain.seed = cfg.seed;
  cfg.ga.seed = cfg.seed;

  if (ep_fitness_weights_validate(&cfg.ga.weights) != EP_OK)
    throw ConfigError(ep_last_error());
  if (ep_ga_config_validate(&cfg.ga) != EP_OK) throw ConfigError(ep_last_error());
  if (ep_train_config_validate(&cfg.pretrain) != EP_OK) throw ConfigError(ep_last_error());
  return cfg;
}

void require_files(const std::vector<std::filesystem::path>& paths) {
  for (const auto& p : paths) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(p, ec))
      throw ConfigError("missing file: " + p.string());
  }
}

}  // namespace evoprune::cli
