#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "genome.hpp"
#include "metrics.hpp"
#include "mnist.hpp"
#include "nn.hpp"

namespace evoprune {

struct GaConfig {
  std::size_t population = 30;        // N
  std::size_t selected = 5;           // K
  double crossover_rate = 0.6;        // P_c
  double conv_mutation_rate = 0.1;    // P_mc
  double fc_mutation_rate = 0.15;     // P_mf
  std::size_t retrain_interval = 5;   // T
  std::size_t max_generations = 100;  // G
  // Stop once the retrained elite improved by less than the threshold over
  // the last `convergence_window` retrain cycles.
  std::size_t convergence_window = 3;
  double convergence_threshold = 1e-3;
  TrainConfig retrain = interval_training();
  TrainConfig final_train = final_training();
  FitnessWeights weights;
  std::uint64_t seed = 0;
  // Concurrent fitness evaluations; results do not depend on it.
  std::size_t threads = 1;

  static TrainConfig interval_training() {
    TrainConfig t;
    t.epochs = 1;
    return t;
  }
  static TrainConfig final_training() {
    TrainConfig t;
    t.epochs = 3;
    return t;
  }

  void validate() const;
};

struct Population {
  std::size_t generation = 0;
  std::vector<Genome> genomes;
  std::vector<double> fitness;
  std::size_t elite = 0;  // argmin fitness, lowest index on ties

  const Genome& elite_genome() const { return genomes[elite]; }
  double mean_fitness() const;
};

struct GenerationRecord {
  std::size_t generation = 0;
  Metrics elite;
  double mean_fitness = 0.0;
  bool retrained = false;
  double seconds = 0.0;  // wall clock since the run started; not reproducible
};

// Evaluates every genome without a matching cached result and fills in
// fitness and elite.
void evaluate(Population& pop, const GaConfig& cfg, const Dataset& validation);

Population init_population(const Genome& pretrained, const GaConfig& cfg,
                           const Dataset& validation);

// Indices of the k lowest-fitness genomes in ascending fitness order; ties
// go to the lower index.
std::vector<std::size_t> select(const Population& pop, std::size_t k);

// Starts from the loser and takes each layer gene from the winner with
// probability 1/2, then propagates and applies masks.
Genome microbial_crossover(const Genome& winner, const Genome& loser, RngStream& rng);

struct Offspring {
  Genome genome;
  std::size_t parent = 0;  // population index of the first-drawn parent
  bool crossed = false;    // true when produced by microbial crossover
};

// Fills N-1 slots from the selected parents: a uniform parent A; with
// probability P_c a distinct parent B, the fitter of the two infecting the
// other; otherwise a copy of A.
std::vector<Offspring> reproduce(const Population& pop, std::span<const std::size_t> parents,
                                 const GaConfig& cfg, std::size_t generation);

// One generation: select, reproduce, mutate all but the elite, re-evaluate.
Population step(const Population& pop, const GaConfig& cfg, const Dataset& validation);

// Retrains the elite under frozen masks and refills the population with
// N-1 mutants of it.
Population retrain_and_reseed(const Population& pop, const GaConfig& cfg, const Dataset& fit,
                              const Dataset& validation);

struct RunResult {
  Genome best;  // final elite after the closing retraining
  std::vector<GenerationRecord> records;
  bool converged = false;
};

using GenerationObserver = std::function<void(const GenerationRecord&, const Population&)>;

RunResult run(const Genome& pretrained, const GaConfig& cfg, const Dataset& fit,
              const Dataset& validation, const GenerationObserver& observer = {});

}  // namespace evoprune
