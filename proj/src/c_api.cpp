#include "evoprune/evoprune.h"

#include <cmath>
#include <limits>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "error.hpp"
#include "ga.hpp"
#include "genome.hpp"
#include "metrics.hpp"
#include "mnist.hpp"
#include "report.hpp"

struct ep_dataset {
  evoprune::Dataset data;
};

struct ep_genome {
  evoprune::Genome genome;
};

namespace {

thread_local std::string last_error;

ep_status to_status(evoprune::ErrorCode code) {
  using evoprune::ErrorCode;
  switch (code) {
    case ErrorCode::invalid_argument: return EP_ERR_INVALID_ARGUMENT;
    case ErrorCode::shape_mismatch: return EP_ERR_SHAPE_MISMATCH;
    case ErrorCode::io: return EP_ERR_IO;
    case ErrorCode::bad_magic: return EP_ERR_BAD_MAGIC;
    case ErrorCode::truncated: return EP_ERR_TRUNCATED;
    case ErrorCode::count_mismatch: return EP_ERR_COUNT_MISMATCH;
    case ErrorCode::version_mismatch: return EP_ERR_VERSION_MISMATCH;
    case ErrorCode::corrupt_length: return EP_ERR_CORRUPT_LENGTH;
    case ErrorCode::inconsistent_masks: return EP_ERR_INCONSISTENT_MASKS;
    case ErrorCode::config: return EP_ERR_CONFIG;
    case ErrorCode::parse: return EP_ERR_PARSE;
  }
  return EP_ERR_INTERNAL;
}

template <class F>
ep_status guarded(F&& body) {
  try {
    body();
    return EP_OK;
  } catch (const evoprune::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return EP_ERR_OUT_OF_MEMORY;
  } catch (const std::exception& e) {
    last_error = e.what();
    return EP_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return EP_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  evoprune::require(p != nullptr, evoprune::ErrorCode::invalid_argument,
                    std::string(what) + " must not be NULL");
}

evoprune::TrainConfig to_cpp(const ep_train_config& c) {
  evoprune::TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.learning_rate = c.learning_rate;
  t.momentum = c.momentum;
  t.lr_decay = c.lr_decay;
  t.decay_at = c.decay_at;
  t.samples_per_epoch = c.samples_per_epoch;
  t.seed = c.seed;
  return t;
}

ep_train_config to_c(const evoprune::TrainConfig& t) {
  return {t.epochs,   t.batch_size, t.learning_rate, t.momentum, t.lr_decay,
          t.decay_at, t.samples_per_epoch, t.seed};
}

evoprune::FitnessWeights to_cpp(const ep_fitness_weights& w) {
  return {w.lambda1, w.lambda2, w.lambda3};
}

evoprune::GaConfig to_cpp(const ep_ga_config& c) {
  evoprune::GaConfig g;
  g.population = c.population;
  g.selected = c.selected;
  g.crossover_rate = c.crossover_rate;
  g.conv_mutation_rate = c.conv_mutation_rate;
  g.fc_mutation_rate = c.fc_mutation_rate;
  g.retrain_interval = c.retrain_interval;
  g.max_generations = c.max_generations;
  g.convergence_window = c.convergence_window;
  g.convergence_threshold = c.convergence_threshold;
  g.retrain = to_cpp(c.retrain);
  g.final_train = to_cpp(c.final_train);
  g.weights = to_cpp(c.weights);
  g.seed = c.seed;
  g.threads = c.threads;
  return g;
}

ep_metrics to_c(const evoprune::Metrics& m) {
  return {m.error, m.computation, m.sparsity, m.fitness};
}

}  // namespace

extern "C" {

const char* ep_version(void) { return "1.0.0"; }

const char* ep_status_name(ep_status status) {
  switch (status) {
    case EP_OK: return "ok";
    case EP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case EP_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case EP_ERR_IO: return "i/o error";
    case EP_ERR_BAD_MAGIC: return "bad magic";
    case EP_ERR_TRUNCATED: return "truncated file";
    case EP_ERR_COUNT_MISMATCH: return "count mismatch";
    case EP_ERR_VERSION_MISMATCH: return "version mismatch";
    case EP_ERR_CORRUPT_LENGTH: return "corrupt length";
    case EP_ERR_INCONSISTENT_MASKS: return "inconsistent masks";
    case EP_ERR_CONFIG: return "configuration error";
    case EP_ERR_PARSE: return "parse error";
    case EP_ERR_OUT_OF_MEMORY: return "out of memory";
    case EP_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* ep_last_error(void) { return last_error.c_str(); }

ep_status ep_dataset_load_idx(const char* images_path, const char* labels_path,
                              ep_dataset** out) {
  return guarded([&] {
    need(images_path, "images_path");
    need(labels_path, "labels_path");
    need(out, "out");
    *out = new ep_dataset{evoprune::load_idx(images_path, labels_path)};
  });
}

ep_status ep_dataset_split(const ep_dataset* data, size_t validation_size, uint64_t seed,
                           ep_dataset** fit, ep_dataset** validation) {
  return guarded([&] {
    need(data, "data");
    need(fit, "fit");
    need(validation, "validation");
    auto parts = evoprune::split(data->data, {validation_size, seed});
    auto f = std::make_unique<ep_dataset>(ep_dataset{std::move(parts.fit)});
    auto v = std::make_unique<ep_dataset>(ep_dataset{std::move(parts.validation)});
    *fit = f.release();
    *validation = v.release();
  });
}

size_t ep_dataset_size(const ep_dataset* data) { return data ? data->data.size() : 0; }

void ep_dataset_free(ep_dataset* data) { delete data; }

void ep_train_config_default(ep_train_config* cfg) {
  if (cfg) *cfg = to_c(evoprune::TrainConfig{});
}

ep_status ep_train_config_validate(const ep_train_config* cfg) {
  return guarded([&] {
    need(cfg, "cfg");
    to_cpp(*cfg).validate();
  });
}

ep_status ep_fitness_weights_validate(const ep_fitness_weights* weights) {
  return guarded([&] {
    need(weights, "weights");
    to_cpp(*weights).validate();
  });
}

void ep_ga_config_default(ep_ga_config* cfg) {
  if (!cfg) return;
  const evoprune::GaConfig g;
  cfg->population = g.population;
  cfg->selected = g.selected;
  cfg->crossover_rate = g.crossover_rate;
  cfg->conv_mutation_rate = g.conv_mutation_rate;
  cfg->fc_mutation_rate = g.fc_mutation_rate;
  cfg->retrain_interval = g.retrain_interval;
  cfg->max_generations = g.max_generations;
  cfg->convergence_window = g.convergence_window;
  cfg->convergence_threshold = g.convergence_threshold;
  cfg->retrain = to_c(g.retrain);
  cfg->final_train = to_c(g.final_train);
  cfg->weights = {g.weights.error, g.weights.computation, g.weights.sparsity};
  cfg->seed = g.seed;
  cfg->threads = g.threads;
}

ep_status ep_ga_config_validate(const ep_ga_config* cfg) {
  return guarded([&] {
    need(cfg, "cfg");
    to_cpp(*cfg).validate();
  });
}

ep_status ep_pretrain(const ep_dataset* fit, const ep_train_config* cfg, uint64_t init_seed,
                      ep_epoch_fn on_epoch, void* user, ep_genome** out) {
  return guarded([&] {
    need(fit, "fit");
    need(cfg, "cfg");
    need(out, "out");
    auto arch = evoprune::NetworkArch::lenet();
    auto masks = evoprune::full_masks(arch);
    evoprune::TrainObserver observer;
    if (on_epoch) observer = [&](std::size_t e, double loss) { on_epoch(e, loss, user); };
    auto params = evoprune::train_masked(arch, evoprune::init_params(arch, init_seed), masks,
                                         fit->data, to_cpp(*cfg), observer);
    *out = new ep_genome{evoprune::Genome(arch, std::move(params), std::move(masks))};
  });
}

ep_status ep_genome_save(const ep_genome* genome, const char* path) {
  return guarded([&] {
    need(genome, "genome");
    need(path, "path");
    evoprune::save_checkpoint(genome->genome, path);
  });
}

ep_status ep_genome_load(const char* path, ep_genome** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ep_genome{evoprune::load_checkpoint(path)};
  });
}

void ep_genome_free(ep_genome* genome) { delete genome; }

ep_status ep_genome_flops(const ep_genome* genome, uint64_t* remaining, uint64_t* dense) {
  return guarded([&] {
    need(genome, "genome");
    const auto count = evoprune::count_flops(genome->genome);
    if (remaining) *remaining = count.remaining;
    if (dense) *dense = count.dense;
  });
}

ep_status ep_genome_sparsity(const ep_genome* genome, double* sparsity) {
  return guarded([&] {
    need(genome, "genome");
    need(sparsity, "sparsity");
    *sparsity = evoprune::count_sparsity(genome->genome);
  });
}

ep_status ep_genome_evaluate(const ep_genome* genome, const ep_dataset* data,
                             const ep_fitness_weights* weights, ep_metrics* out) {
  return guarded([&] {
    need(genome, "genome");
    need(data, "data");
    need(out, "out");
    if (weights != nullptr) {
      *out = to_c(evoprune::measure(genome->genome, to_cpp(*weights), data->data));
      return;
    }
    const auto& g = genome->genome;
    require(!data->data.empty(), evoprune::ErrorCode::invalid_argument, "empty dataset");
    out->computation = evoprune::count_flops(g).fraction();
    out->sparsity = evoprune::count_sparsity(g);
    out->error = evoprune::predict_error(g.arch(), g.params(), g.masks(), data->data);
    out->fitness = std::numeric_limits<double>::quiet_NaN();
  });
}

ep_status ep_prune(const ep_genome* pretrained, const ep_ga_config* cfg, const ep_dataset* fit,
                   const ep_dataset* validation, const char* curves_csv,
                   ep_generation_fn on_generation, void* user, ep_prune_result* out) {
  return guarded([&] {
    need(pretrained, "pretrained");
    need(cfg, "cfg");
    need(fit, "fit");
    need(validation, "validation");
    need(out, "out");
    const auto config = to_cpp(*cfg);
    config.validate();

    std::optional<evoprune::CurvesWriter> writer;
    if (curves_csv != nullptr) writer.emplace(curves_csv);
    auto observer = [&](const evoprune::GenerationRecord& r, const evoprune::Population&) {
      if (writer) writer->append(evoprune::to_curve_point(r));
      if (on_generation) {
        const ep_generation_record rec{r.generation, to_c(r.elite), r.mean_fitness,
                                       r.retrained ? 1 : 0, r.seconds};
        on_generation(&rec, user);
      }
    };
    auto result = evoprune::run(pretrained->genome, config, fit->data, validation->data, observer);
    out->generations = result.records.size();
    out->converged = result.converged ? 1 : 0;
    out->best = new ep_genome{std::move(result.best)};
  });
}

ep_status ep_plot_curves(const char* csv_path, const char* svg_path, const char* title) {
  return guarded([&] {
    need(csv_path, "csv_path");
    need(svg_path, "svg_path");
    evoprune::write_curves_svg(csv_path, svg_path, title ? title : "");
  });
}

ep_status ep_write_summary(const char* path, const ep_fitness_weights* weights,
                           const ep_metrics* final_test, double baseline_error) {
  return guarded([&] {
    need(path, "path");
    need(weights, "weights");
    need(final_test, "final_test");
    evoprune::SummaryRow row;
    row.weights = to_cpp(*weights);
    row.error = final_test->error;
    row.computation = final_test->computation;
    row.sparsity = final_test->sparsity;
    row.accuracy_change = baseline_error - final_test->error;
    evoprune::write_summary(path, row);
  });
}

}  // extern "C"
