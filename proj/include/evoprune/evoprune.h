/*
 * evoprune: multi-objective genetic pruning of LeNet-class CNNs.
 *
 * C interface. All objects are opaque handles owned by the caller and
 * released with the matching *_free function. Every fallible call returns
 * an ep_status; on failure ep_last_error() describes the problem (the
 * message is per thread and valid until the next failing call).
 */
#ifndef EVOPRUNE_H
#define EVOPRUNE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(EVOPRUNE_BUILDING)
#define EVOPRUNE_API __declspec(dllexport)
#else
#define EVOPRUNE_API __declspec(dllimport)
#endif
#else
#define EVOPRUNE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ep_status {
  EP_OK = 0,
  EP_ERR_INVALID_ARGUMENT = 1,
  EP_ERR_SHAPE_MISMATCH = 2,
  EP_ERR_IO = 3,
  EP_ERR_BAD_MAGIC = 4,
  EP_ERR_TRUNCATED = 5,
  EP_ERR_COUNT_MISMATCH = 6,
  EP_ERR_VERSION_MISMATCH = 7,
  EP_ERR_CORRUPT_LENGTH = 8,
  EP_ERR_INCONSISTENT_MASKS = 9,
  EP_ERR_CONFIG = 10,
  EP_ERR_PARSE = 11,
  EP_ERR_OUT_OF_MEMORY = 12,
  EP_ERR_INTERNAL = 13
} ep_status;

EVOPRUNE_API const char* ep_version(void);
EVOPRUNE_API const char* ep_status_name(ep_status status);
EVOPRUNE_API const char* ep_last_error(void);

/* ---- datasets ---------------------------------------------------------- */

typedef struct ep_dataset ep_dataset;

/* IDX image (magic 2051) and label (magic 2049) files. */
EVOPRUNE_API ep_status ep_dataset_load_idx(const char* images_path, const char* labels_path,
                                           ep_dataset** out);
/* Seeded disjoint split into a fit set and a validation set. */
EVOPRUNE_API ep_status ep_dataset_split(const ep_dataset* data, size_t validation_size,
                                        uint64_t seed, ep_dataset** fit,
                                        ep_dataset** validation);
EVOPRUNE_API size_t ep_dataset_size(const ep_dataset* data);
EVOPRUNE_API void ep_dataset_free(ep_dataset* data);

/* ---- configuration ----------------------------------------------------- */

typedef struct ep_train_config {
  size_t epochs;
  size_t batch_size;
  double learning_rate;
  double momentum;
  double lr_decay;          /* learning-rate factor applied ...            */
  double decay_at;          /* ... from epoch decay_at * epochs onwards     */
  size_t samples_per_epoch; /* 0 = whole dataset                          */
  uint64_t seed;
} ep_train_config;

/* Pretraining defaults: 10 epochs, batch 64, lr 0.01, momentum 0.9. */
EVOPRUNE_API void ep_train_config_default(ep_train_config* cfg);
EVOPRUNE_API ep_status ep_train_config_validate(const ep_train_config* cfg);

typedef struct ep_fitness_weights {
  double lambda1; /* error       */
  double lambda2; /* computation */
  double lambda3; /* 1 - sparsity */
} ep_fitness_weights;

/* EP_ERR_CONFIG unless each lambda is in [0, 1] and they sum to 1. */
EVOPRUNE_API ep_status ep_fitness_weights_validate(const ep_fitness_weights* weights);

typedef struct ep_ga_config {
  size_t population;
  size_t selected;
  double crossover_rate;
  double conv_mutation_rate;
  double fc_mutation_rate;
  size_t retrain_interval;
  size_t max_generations;
  size_t convergence_window;
  double convergence_threshold;
  ep_train_config retrain;
  ep_train_config final_train;
  ep_fitness_weights weights;
  uint64_t seed;
  size_t threads;
} ep_ga_config;

/* N=30, K=5, P_c=0.6, P_mc=0.1, P_mf=0.15, T=5, G=100, lambda=(0.3,0.4,0.3). */
EVOPRUNE_API void ep_ga_config_default(ep_ga_config* cfg);
EVOPRUNE_API ep_status ep_ga_config_validate(const ep_ga_config* cfg);

/* ---- genomes ----------------------------------------------------------- */

typedef struct ep_genome ep_genome;

typedef struct ep_metrics {
  double error;
  double computation;
  double sparsity;
  double fitness; /* NaN when evaluated without weights */
} ep_metrics;

typedef void (*ep_epoch_fn)(size_t epoch, double mean_loss, void* user);

/* Trains a fresh dense LeNet (20-50-500-10) on `fit`. */
EVOPRUNE_API ep_status ep_pretrain(const ep_dataset* fit, const ep_train_config* cfg,
                                   uint64_t init_seed, ep_epoch_fn on_epoch, void* user,
                                   ep_genome** out);

EVOPRUNE_API ep_status ep_genome_save(const ep_genome* genome, const char* path);
EVOPRUNE_API ep_status ep_genome_load(const char* path, ep_genome** out);
EVOPRUNE_API void ep_genome_free(ep_genome* genome);

EVOPRUNE_API ep_status ep_genome_flops(const ep_genome* genome, uint64_t* remaining,
                                       uint64_t* dense);
EVOPRUNE_API ep_status ep_genome_sparsity(const ep_genome* genome, double* sparsity);
/* weights may be NULL: then only e, c and s are computed. */
EVOPRUNE_API ep_status ep_genome_evaluate(const ep_genome* genome, const ep_dataset* data,
                                          const ep_fitness_weights* weights, ep_metrics* out);

/* ---- pruning ----------------------------------------------------------- */

typedef struct ep_generation_record {
  size_t generation;
  ep_metrics elite;
  double mean_fitness;
  int retrained;
  double seconds;
} ep_generation_record;

typedef void (*ep_generation_fn)(const ep_generation_record* record, void* user);

typedef struct ep_prune_result {
  ep_genome* best;    /* owned by the caller */
  size_t generations; /* generations actually run */
  int converged;
} ep_prune_result;

/* Runs the genetic pruning loop. When curves_csv is not NULL one row per
 * generation is appended to it as the run progresses. */
EVOPRUNE_API ep_status ep_prune(const ep_genome* pretrained, const ep_ga_config* cfg,
                                const ep_dataset* fit, const ep_dataset* validation,
                                const char* curves_csv, ep_generation_fn on_generation,
                                void* user, ep_prune_result* out);

/* ---- reporting --------------------------------------------------------- */

/* Renders a curves CSV to an SVG with the elite fitness, error, sparsity
 * and FLOPs curves. */
EVOPRUNE_API ep_status ep_plot_curves(const char* csv_path, const char* svg_path,
                                      const char* title);

EVOPRUNE_API ep_status ep_write_summary(const char* path, const ep_fitness_weights* weights,
                                        const ep_metrics* final_test, double baseline_error);

#ifdef __cplusplus
}
#endif

#endif /* EVOPRUNE_H */
