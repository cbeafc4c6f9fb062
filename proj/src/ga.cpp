#include "ga.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace evoprune {

namespace {

void refresh_elite(Population& pop) {
  pop.elite = static_cast<std::size_t>(
      std::min_element(pop.fitness.begin(), pop.fitness.end()) - pop.fitness.begin());
}

TrainConfig seeded(TrainConfig t, std::uint64_t master, std::size_t generation) {
  t.seed = RngStream::derive(master, generation, 0, StreamTag::shuffle);
  return t;
}

}  // namespace

void GaConfig::validate() const {
  require(population >= 1, ErrorCode::config, "population size must be at least 1");
  require(selected >= 1 && selected <= population, ErrorCode::config,
          "selected genomes K must satisfy 1 <= K <= N");
  for (double p : {crossover_rate, conv_mutation_rate, fc_mutation_rate})
    require(p >= 0.0 && p <= 1.0, ErrorCode::config, "rates must lie in [0, 1]");
  require(retrain_interval >= 1, ErrorCode::config, "retrain interval T must be at least 1");
  require(max_generations >= 1, ErrorCode::config, "generation cap G must be at least 1");
  require(convergence_window >= 1, ErrorCode::config, "convergence window must be at least 1");
  require(convergence_threshold >= 0.0, ErrorCode::config,
          "convergence threshold must be nonnegative");
  retrain.validate();
  final_train.validate();
  weights.validate();
}

double Population::mean_fitness() const {
  return fitness.empty() ? 0.0
                         : std::accumulate(fitness.begin(), fitness.end(), 0.0) /
                               static_cast<double>(fitness.size());
}

void evaluate(Population& pop, const GaConfig& cfg, const Dataset& validation) {
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < pop.genomes.size(); ++i) {
    const auto& c = pop.genomes[i].cache();
    if (!c || c->weights != cfg.weights || c->dataset_id != validation.id()) pending.push_back(i);
  }

  const std::size_t workers = std::min(std::max<std::size_t>(cfg.threads, 1), pending.size());
  if (workers <= 1) {
    for (auto i : pending) fitness(pop.genomes[i], cfg.weights, validation);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t j = next++; j < pending.size(); j = next++) {
            try {
              fitness(pop.genomes[pending[j]], cfg.weights, validation);
            } catch (...) {
              std::lock_guard lock(error_mutex);
              if (!error) error = std::current_exception();
            }
          }
        });
      }
    }
    if (error) std::rethrow_exception(error);
  }

  pop.fitness.resize(pop.genomes.size());
  for (std::size_t i = 0; i < pop.genomes.size(); ++i)
    pop.fitness[i] = pop.genomes[i].cache()->metrics.fitness;
  refresh_elite(pop);
}

Population init_population(const Genome& pretrained, const GaConfig& cfg,
                           const Dataset& validation) {
  cfg.validate();
  require(pretrained.is_dense(), ErrorCode::invalid_argument,
          "the pretrained genome must be dense (all masks 1)");
  bool nonzero = false;
  for (const auto& lp : pretrained.params()) {
    for (double w : lp.values()) {
      require(std::isfinite(w), ErrorCode::invalid_argument, "pretrained weights are not finite");
      nonzero = nonzero || w != 0.0;
    }
  }
  require(nonzero, ErrorCode::invalid_argument, "pretrained genome has all-zero weights");

  Population pop;
  pop.generation = 0;
  pop.genomes.reserve(cfg.population);
  for (std::size_t i = 0; i < cfg.population; ++i) {
    RngStream rng(cfg.seed, 0, i, StreamTag::mutate);
    pop.genomes.push_back(mutate(pretrained, cfg.conv_mutation_rate, cfg.fc_mutation_rate, rng));
  }
  evaluate(pop, cfg, validation);
  return pop;
}

std::vector<std::size_t> select(const Population& pop, std::size_t k) {
  require(k <= pop.fitness.size(), ErrorCode::invalid_argument,
          "cannot select more genomes than the population holds");
  std::vector<std::size_t> order(pop.fitness.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pop.fitness[a] < pop.fitness[b]; });
  order.resize(k);
  return order;
}

Genome microbial_crossover(const Genome& winner, const Genome& loser, RngStream& rng) {
  require(winner.arch() == loser.arch(), ErrorCode::shape_mismatch,
          "crossover requires genomes of the same architecture");
  Genome child = loser;
  for (std::size_t layer = 0; layer < child.layer_count(); ++layer)
    if (rng.bernoulli(0.5)) child.copy_gene(layer, winner);
  return apply_masks(propagate_masks(std::move(child)));
}

std::vector<Offspring> reproduce(const Population& pop, std::span<const std::size_t> parents,
                                 const GaConfig& cfg, std::size_t generation) {
  require(!parents.empty(), ErrorCode::invalid_argument, "reproduction needs at least one parent");
  const std::size_t slots = cfg.population - 1;
  std::vector<Offspring> brood;
  brood.reserve(slots);
  for (std::size_t slot = 0; slot < slots; ++slot) {
    RngStream rng(cfg.seed, generation, slot, StreamTag::reproduce);
    const std::size_t a = rng.below(parents.size());
    const std::size_t pa = parents[a];
    const bool cross = rng.bernoulli(cfg.crossover_rate);
    if (cross && parents.size() > 1) {
      std::size_t b = rng.below(parents.size() - 1);
      if (b >= a) ++b;
      const std::size_t pb = parents[b];
      const bool a_wins =
          pop.fitness[pa] < pop.fitness[pb] || (pop.fitness[pa] == pop.fitness[pb] && pa < pb);
      const std::size_t winner = a_wins ? pa : pb;
      const std::size_t loser = a_wins ? pb : pa;
      RngStream genes(cfg.seed, generation, slot, StreamTag::crossover);
      brood.push_back(
          {microbial_crossover(pop.genomes[winner], pop.genomes[loser], genes), pa, true});
    } else {
      brood.push_back({pop.genomes[pa], pa, false});
    }
  }
  return brood;
}

Population step(const Population& pop, const GaConfig& cfg, const Dataset& validation) {
  const std::size_t generation = pop.generation + 1;
  const auto parents = select(pop, cfg.selected);
  auto brood = reproduce(pop, parents, cfg, generation);

  Population next;
  next.generation = generation;
  next.genomes.reserve(cfg.population);
  for (std::size_t slot = 0; slot < brood.size(); ++slot) {
    RngStream rng(cfg.seed, generation, slot, StreamTag::mutate);
    next.genomes.push_back(
        mutate(brood[slot].genome, cfg.conv_mutation_rate, cfg.fc_mutation_rate, rng));
  }
  next.genomes.push_back(pop.elite_genome());
  evaluate(next, cfg, validation);
  return next;
}

Population retrain_and_reseed(const Population& pop, const GaConfig& cfg, const Dataset& fit,
                              const Dataset& validation) {
  const auto& elite = pop.elite_genome();
  Genome trained = elite;
  trained.replace_params(train_masked(elite.arch(), elite.params(), elite.masks(), fit,
                                      seeded(cfg.retrain, cfg.seed, pop.generation)));

  Population next;
  next.generation = pop.generation;
  next.genomes.reserve(cfg.population);
  for (std::size_t i = 0; i + 1 < cfg.population; ++i) {
    RngStream rng(cfg.seed, pop.generation, i, StreamTag::reseed);
    next.genomes.push_back(mutate(trained, cfg.conv_mutation_rate, cfg.fc_mutation_rate, rng));
  }
  next.genomes.push_back(std::move(trained));
  evaluate(next, cfg, validation);
  return next;
}

RunResult run(const Genome& pretrained, const GaConfig& cfg, const Dataset& fit,
              const Dataset& validation, const GenerationObserver& observer) {
  cfg.validate();
  require(!fit.empty(), ErrorCode::invalid_argument, "empty training split");
  require(!validation.empty(), ErrorCode::invalid_argument, "empty validation split");
  const auto start = std::chrono::steady_clock::now();

  RunResult result;
  Population pop = init_population(pretrained, cfg, validation);
  std::vector<double> cycle_fitness;

  for (std::size_t g = 1; g <= cfg.max_generations; ++g) {
    pop = step(pop, cfg, validation);
    GenerationRecord record;
    record.generation = g;
    if (g % cfg.retrain_interval == 0) {
      pop = retrain_and_reseed(pop, cfg, fit, validation);
      record.retrained = true;
      cycle_fitness.push_back(pop.fitness[pop.elite]);
    }
    record.elite = pop.elite_genome().cache()->metrics;
    record.mean_fitness = pop.mean_fitness();
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.records.push_back(record);
    if (observer) observer(record, pop);

    const std::size_t w = cfg.convergence_window;
    if (record.retrained && cycle_fitness.size() > w &&
        cycle_fitness[cycle_fitness.size() - 1 - w] - cycle_fitness.back() <
            cfg.convergence_threshold) {
      result.converged = true;
      break;
    }
  }

  const auto& elite = pop.elite_genome();
  result.best = elite;
  result.best.replace_params(train_masked(elite.arch(), elite.params(), elite.masks(), fit,
                                          seeded(cfg.final_train, cfg.seed, pop.generation + 1)));
  return result;
}

}  // namespace evoprune
