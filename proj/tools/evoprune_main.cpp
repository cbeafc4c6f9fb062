// evoprune command-line front end. Talks to the library only through the C API.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evoprune/evoprune.h"
#include "run_config.hpp"

namespace fs = std::filesystem;
using evoprune::cli::ConfigError;
using evoprune::cli::KeyValues;
using evoprune::cli::RunConfig;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_runtime = 1;
constexpr int exit_config = 2;

// A failed library call; exit code depends on the status class.
struct ApiFailure {
  ep_status status;
  std::string message;
};

void check(ep_status status, const std::string& context) {
  if (status != EP_OK) throw ApiFailure{status, context + ": " + ep_last_error()};
}

int exit_code_for(ep_status status) {
  switch (status) {
    case EP_ERR_IO:
    case EP_ERR_BAD_MAGIC:
    case EP_ERR_TRUNCATED:
    case EP_ERR_COUNT_MISMATCH:
    case EP_ERR_VERSION_MISMATCH:
    case EP_ERR_CORRUPT_LENGTH:
    case EP_ERR_PARSE:
    case EP_ERR_CONFIG:
      return exit_config;
    default:
      return exit_runtime;
  }
}

struct DatasetDeleter {
  void operator()(ep_dataset* d) const { ep_dataset_free(d); }
};
struct GenomeDeleter {
  void operator()(ep_genome* g) const { ep_genome_free(g); }
};
using DatasetPtr = std::unique_ptr<ep_dataset, DatasetDeleter>;
using GenomePtr = std::unique_ptr<ep_genome, GenomeDeleter>;

DatasetPtr load_dataset(const fs::path& images, const fs::path& labels) {
  ep_dataset* d = nullptr;
  check(ep_dataset_load_idx(images.c_str(), labels.c_str(), &d), "loading " + images.string());
  return DatasetPtr(d);
}

std::pair<DatasetPtr, DatasetPtr> split(const ep_dataset* train, const RunConfig& cfg) {
  ep_dataset* fit = nullptr;
  ep_dataset* validation = nullptr;
  check(ep_dataset_split(train, cfg.validation_size, cfg.split_seed, &fit, &validation),
        "splitting the training set");
  return {DatasetPtr(fit), DatasetPtr(validation)};
}

GenomePtr load_genome(const fs::path& path) {
  ep_genome* g = nullptr;
  check(ep_genome_load(path.c_str(), &g), "loading checkpoint " + path.string());
  return GenomePtr(g);
}

ep_metrics evaluate(const ep_genome* g, const ep_dataset* data, const ep_fitness_weights* w) {
  ep_metrics m{};
  check(ep_genome_evaluate(g, data, w, &m), "evaluating");
  return m;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Options shared by the subcommands, gathered as key=value overrides.
struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda1, lambda2, lambda3;
  std::optional<std::string> preset, out, data, baseline, checkpoint;
  std::optional<std::size_t> generations, threads, epochs;
  std::vector<std::string> set;

  KeyValues to_key_values() const {
    KeyValues kv;
    for (const auto& item : set) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + item + "'");
      kv.insert_or_assign(item.substr(0, eq), item.substr(eq + 1));
    }
    auto put = [&](const char* key, const auto& value) {
      if (!value) return;
      if constexpr (std::is_same_v<std::decay_t<decltype(*value)>, std::string>)
        kv.insert_or_assign(key, *value);
      else {
        std::ostringstream s;
        s.precision(17);
        s << *value;
        kv.insert_or_assign(key, s.str());
      }
    };
    put("seed", seed);
    put("preset", preset);
    put("lambda1", lambda1);
    put("lambda2", lambda2);
    put("lambda3", lambda3);
    put("out", out);
    put("data", data);
    put("baseline", baseline);
    put("checkpoint", checkpoint);
    put("generations", generations);
    put("threads", threads);
    put("pretrain_epochs", epochs);
    return kv;
  }

  RunConfig resolve() const {
    const KeyValues file = config.empty() ? KeyValues{} : evoprune::cli::read_key_values(config);
    return evoprune::cli::build_config(file, to_key_values());
  }
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "key=value configuration file");
  cmd->add_option("--seed", o.seed, "master random seed");
  cmd->add_option("--data", o.data, "directory holding the MNIST IDX files");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--set", o.set, "extra key=value override (repeatable)");
}

void add_lambdas(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--lambda1", o.lambda1, "weight of the error rate");
  cmd->add_option("--lambda2", o.lambda2, "weight of the remaining computation");
  cmd->add_option("--lambda3", o.lambda3, "weight of the density (1 - sparsity)");
  cmd->add_option("--preset", o.preset, "lambda profile: balanced, speed, storage, accuracy");
}

void print_metrics(const ep_metrics& m, bool with_fitness) {
  std::printf("error=%.6f\ncomputation=%.6f\nsparsity=%.6f\n", m.error, m.computation,
              m.sparsity);
  if (with_fitness) std::printf("fitness=%.6f\n", m.fitness);
}

int cmd_pretrain(const Overrides& o) {
  const RunConfig cfg = o.resolve();
  evoprune::cli::require_files(
      {cfg.train_images(), cfg.train_labels(), cfg.test_images(), cfg.test_labels()});
  make_dir(cfg.out_dir);
  const auto start = std::chrono::steady_clock::now();

  auto train = load_dataset(cfg.train_images(), cfg.train_labels());
  auto test = load_dataset(cfg.test_images(), cfg.test_labels());
  auto [fit, validation] = split(train.get(), cfg);
  train.reset();

  std::fprintf(stderr, "pretraining on %zu images for %zu epochs\n", ep_dataset_size(fit.get()),
               cfg.pretrain.epochs);
  auto on_epoch = [](std::size_t epoch, double loss, void*) {
    std::fprintf(stderr, "  epoch %zu  loss %.4f\n", epoch + 1, loss);
  };
  ep_genome* raw = nullptr;
  check(ep_pretrain(fit.get(), &cfg.pretrain, cfg.seed, on_epoch, nullptr, &raw), "pretraining");
  GenomePtr genome(raw);

  const fs::path ckpt = cfg.out_dir / "baseline.ckpt";
  check(ep_genome_save(genome.get(), ckpt.c_str()), "saving " + ckpt.string());
  const ep_metrics m = evaluate(genome.get(), test.get(), nullptr);
  const double elapsed = seconds_since(start);

  const fs::path metrics_path = cfg.out_dir / "baseline_metrics.txt";
  std::ofstream out(metrics_path);
  out << "test_error=" << m.error << "\nseconds=" << elapsed << '\n';
  if (!out) throw ApiFailure{EP_ERR_IO, "cannot write " + metrics_path.string()};

  std::printf("checkpoint=%s\ntest_error=%.6f\nseconds=%.1f\n", ckpt.c_str(), m.error, elapsed);
  return exit_ok;
}

int cmd_prune(const Overrides& o) {
  const RunConfig cfg = o.resolve();
  const fs::path baseline = cfg.baseline_path();
  evoprune::cli::require_files({baseline, cfg.train_images(), cfg.train_labels(),
                                cfg.test_images(), cfg.test_labels()});
  make_dir(cfg.out_dir);

  auto pretrained = load_genome(baseline);
  auto train = load_dataset(cfg.train_images(), cfg.train_labels());
  auto test = load_dataset(cfg.test_images(), cfg.test_labels());
  auto [fit, validation] = split(train.get(), cfg);
  train.reset();

  const fs::path curves = cfg.out_dir / "curves.csv";
  auto on_generation = [](const ep_generation_record* r, void*) {
    std::fprintf(stderr, "gen %3zu  f=%.5f e=%.4f c=%.4f s=%.4f  mean_f=%.5f%s  %.0fs\n",
                 r->generation, r->elite.fitness, r->elite.error, r->elite.computation,
                 r->elite.sparsity, r->mean_fitness, r->retrained ? "  [retrained]" : "",
                 r->seconds);
  };
  ep_prune_result result{};
  check(ep_prune(pretrained.get(), &cfg.ga, fit.get(), validation.get(), curves.c_str(),
                 on_generation, nullptr, &result),
        "pruning");
  GenomePtr best(result.best);

  const fs::path ckpt = cfg.out_dir / "pruned.ckpt";
  check(ep_genome_save(best.get(), ckpt.c_str()), "saving " + ckpt.string());

  const ep_metrics base = evaluate(pretrained.get(), test.get(), nullptr);
  const ep_metrics final_test = evaluate(best.get(), test.get(), &cfg.ga.weights);
  const fs::path summary = cfg.out_dir / "summary.csv";
  check(ep_write_summary(summary.c_str(), &cfg.ga.weights, &final_test, base.error),
        "writing " + summary.string());

  std::printf("generations=%zu\nconverged=%d\nbaseline_error=%.6f\n", result.generations,
              result.converged, base.error);
  print_metrics(final_test, true);
  return exit_ok;
}

int cmd_eval(const Overrides& o) {
  const RunConfig cfg = o.resolve();
  if (cfg.checkpoint.empty()) throw ConfigError("eval needs --checkpoint PATH");
  evoprune::cli::require_files({cfg.checkpoint, cfg.test_images(), cfg.test_labels()});
  auto genome = load_genome(cfg.checkpoint);
  auto test = load_dataset(cfg.test_images(), cfg.test_labels());
  const ep_metrics m = evaluate(genome.get(), test.get(), cfg.lambda_given ? &cfg.ga.weights : nullptr);
  print_metrics(m, cfg.lambda_given);
  return exit_ok;
}

int cmd_report(const std::vector<std::string>& csvs, const std::optional<std::string>& out) {
  if (csvs.empty()) throw ConfigError("report needs at least one curves CSV");
  evoprune::cli::require_files({csvs.begin(), csvs.end()});
  if (out) make_dir(*out);
  for (const fs::path csv : csvs) {
    fs::path svg = csv;
    svg.replace_extension(".svg");
    std::string title = csv.stem().string();
    if (csv.has_parent_path() && !csv.parent_path().filename().empty())
      title = csv.parent_path().filename().string() + "/" + title;
    if (out) {
      // Runs usually share the file name; keep the directory in the name.
      std::string name = title;
      for (char& ch : name)
        if (ch == '/') ch = '_';
      svg = fs::path(*out) / (name + ".svg");
    }
    check(ep_plot_curves(csv.c_str(), svg.c_str(), title.c_str()), csv.string());
    std::printf("%s\n", svg.c_str());
  }
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-objective genetic pruning of LeNet on MNIST"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ep_version());

  Overrides pre, prune, ev;
  auto* c_pre = app.add_subcommand("pretrain", "train the dense baseline network");
  add_common(c_pre, pre);
  c_pre->add_option("--epochs", pre.epochs, "pretraining epochs");

  auto* c_prune = app.add_subcommand("prune", "run the genetic pruning loop on a baseline");
  add_common(c_prune, prune);
  add_lambdas(c_prune, prune);
  c_prune->add_option("--generations", prune.generations, "generation cap G");
  c_prune->add_option("--baseline", prune.baseline, "baseline checkpoint (default <out>/baseline.ckpt)");
  c_prune->add_option("--threads", prune.threads, "concurrent fitness evaluations");

  auto* c_eval = app.add_subcommand("eval", "report e, c, s (and f with lambdas) on the test set");
  add_common(c_eval, ev);
  add_lambdas(c_eval, ev);
  c_eval->add_option("--checkpoint,checkpoint", ev.checkpoint, "checkpoint to evaluate");

  std::vector<std::string> csvs;
  std::optional<std::string> report_out;
  auto* c_report = app.add_subcommand("report", "plot curves CSVs as SVG images");
  c_report->add_option("csv", csvs, "curves CSV files")->required();
  c_report->add_option("--out", report_out, "directory for the images (default: beside each CSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_config;
  }

  try {
    if (*c_pre) return cmd_pretrain(pre);
    if (*c_prune) return cmd_prune(prune);
    if (*c_eval) return cmd_eval(ev);
    if (*c_report) return cmd_report(csvs, report_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "evoprune: %s\n", e.what());
    return exit_config;
  } catch (const ApiFailure& e) {
    std::fprintf(stderr, "evoprune: %s\n", e.message.c_str());
    return exit_code_for(e.status);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "evoprune: %s\n", e.what());
    return exit_runtime;
  }
  return exit_runtime;
}
