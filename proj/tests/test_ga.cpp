#include <doctest.h>

#include <cmath>
#include <map>

#include "ga.hpp"
#include "helpers.hpp"

using namespace testing;

namespace {

struct World {
  NetworkArch arch = tiny_arch();
  Dataset fit = blob_dataset(300, 8, 1);
  Dataset validation = blob_dataset(100, 8, 2);
  Genome pretrained;

  World() {
    TrainConfig t;
    t.epochs = 4;
    t.batch_size = 10;
    t.learning_rate = 0.05;
    pretrained = Genome::dense(
        arch, train_masked(arch, init_params(arch, 3), full_masks(arch), fit, t));
  }

  GaConfig config() const {
    GaConfig cfg;
    cfg.population = 8;
    cfg.selected = 3;
    cfg.retrain.batch_size = 10;
    cfg.final_train.batch_size = 10;
    cfg.final_train.epochs = 1;
    cfg.seed = 17;
    return cfg;
  }
};

const World& world() {
  static const World w;
  return w;
}

Population with_fitness(std::vector<double> f) {
  Population p;
  p.fitness = std::move(f);
  return p;
}

bool same_records(const std::vector<GenerationRecord>& a, const std::vector<GenerationRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].generation != b[i].generation || !(a[i].elite == b[i].elite) ||
        a[i].mean_fitness != b[i].mean_fitness || a[i].retrained != b[i].retrained)
      return false;
  return true;
}

}  // namespace

TEST_CASE("select") {
  CHECK(select(with_fitness({0.3, 0.1, 0.2}), 2) == std::vector<std::size_t>{1, 2});
  CHECK(select(with_fitness({0.3, 0.1, 0.2}), 3) == std::vector<std::size_t>{1, 2, 0});
  CHECK(select(with_fitness({0.5, 0.5, 0.5, 0.5}), 2) == std::vector<std::size_t>{0, 1});
  CHECK_THROWS_AS(select(with_fitness({0.1}), 2), Error);
}

TEST_CASE("config validation") {
  GaConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.selected = 31;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = GaConfig{};
  cfg.crossover_rate = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = GaConfig{};
  cfg.retrain_interval = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = GaConfig{};
  cfg.weights = {0.4, 0.3, 0.2};
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("microbial_crossover") {
  const auto arch = two_conv_arch();
  const auto winner = random_genome(arch, 1);
  const auto loser = random_genome(arch, 2);

  SUBCASE("winner equal to loser gives the same genome") {
    RngStream rng(3);
    CHECK(microbial_crossover(winner, winner, rng) == winner);
  }
  SUBCASE("an all-copy stream yields the winner") {
    std::uint64_t seed = 0;
    for (;; ++seed) {
      RngStream probe(seed);
      bool all = true;
      for (std::size_t l = 0; l < winner.layer_count(); ++l) all = all && probe.bernoulli(0.5);
      if (all) break;
    }
    RngStream rng(seed);
    CHECK(microbial_crossover(winner, loser, rng) == winner);
  }
  SUBCASE("each layer is copied half the time") {
    std::vector<std::size_t> copied(winner.layer_count(), 0);
    const std::size_t trials = 10000;
    for (std::size_t t = 0; t < trials; ++t) {
      RngStream rng(5, 0, t, StreamTag::crossover);
      const auto child = microbial_crossover(winner, loser, rng);
      for (std::size_t l = 0; l < copied.size(); ++l)
        copied[l] += child.params()[l] == winner.params()[l];
    }
    for (auto c : copied) CHECK(std::abs(static_cast<double>(c) / trials - 0.5) <= 0.02);
  }
  SUBCASE("offspring masks are consistent") {
    RngStream m1(1), m2(2);
    const auto a = mutate(winner, 0.4, 0.3, m1);
    const auto b = mutate(loser, 0.4, 0.3, m2);
    for (std::uint64_t s = 0; s < 50; ++s) {
      RngStream rng(s);
      const auto child = microbial_crossover(a, b, rng);
      CHECK(masks_consistent(child));
      CHECK(apply_masks(child) == child);
    }
  }
  SUBCASE("architecture mismatch is rejected") {
    RngStream rng(1);
    CHECK_THROWS_AS(microbial_crossover(winner, random_genome(tiny_arch(), 1), rng), Error);
  }
}

TEST_CASE("reproduce") {
  const auto arch = tiny_arch();
  Population pop;
  for (std::size_t i = 0; i < 6; ++i) pop.genomes.push_back(random_genome(arch, 100 + i));
  pop.fitness = {0.6, 0.1, 0.4, 0.2, 0.5, 0.3};
  const std::vector<std::size_t> parents{1, 3, 5};

  GaConfig cfg;
  cfg.population = 6;
  cfg.selected = 3;

  SUBCASE("no crossover gives clones of parents") {
    cfg.crossover_rate = 0.0;
    const auto brood = reproduce(pop, parents, cfg, 1);
    CHECK(brood.size() == 5);
    for (const auto& o : brood) {
      CHECK_FALSE(o.crossed);
      CHECK(o.genome == pop.genomes[o.parent]);
    }
  }
  SUBCASE("a single parent is always cloned") {
    cfg.crossover_rate = 1.0;
    const std::vector<std::size_t> one{3};
    for (const auto& o : reproduce(pop, one, cfg, 2)) {
      CHECK_FALSE(o.crossed);
      CHECK(o.genome == pop.genomes[3]);
    }
  }
  SUBCASE("crossover happens at rate P_c") {
    cfg.crossover_rate = 0.6;
    cfg.population = 1001;
    std::size_t crossed = 0;
    std::size_t slots = 0;
    for (std::size_t g = 1; g <= 10; ++g)
      for (const auto& o : reproduce(pop, parents, cfg, g)) {
        crossed += o.crossed;
        ++slots;
      }
    CHECK(slots == 10000);
    CHECK(std::abs(static_cast<double>(crossed) / slots - 0.6) <= 0.02);
  }
  SUBCASE("parents are drawn uniformly") {
    cfg.crossover_rate = 0.0;
    cfg.population = 3001;
    std::map<std::size_t, std::size_t> hits;
    for (const auto& o : reproduce(pop, parents, cfg, 1)) ++hits[o.parent];
    for (auto p : parents) CHECK(std::abs(hits[p] / 3000.0 - 1.0 / 3.0) <= 0.03);
  }
}

TEST_CASE("init_population") {
  const auto& w = world();
  auto cfg = w.config();

  SUBCASE("N mutants with fitness") {
    const auto pop = init_population(w.pretrained, cfg, w.validation);
    CHECK(pop.genomes.size() == cfg.population);
    CHECK(pop.fitness.size() == cfg.population);
    CHECK(pop.fitness[pop.elite] == *std::min_element(pop.fitness.begin(), pop.fitness.end()));
    CHECK_FALSE(pop.genomes[0] == pop.genomes[1]);
  }
  SUBCASE("N = 1") {
    cfg.population = 1;
    cfg.selected = 1;
    CHECK(init_population(w.pretrained, cfg, w.validation).genomes.size() == 1);
  }
  SUBCASE("zero rates give identical copies") {
    cfg.conv_mutation_rate = 0.0;
    cfg.fc_mutation_rate = 0.0;
    const auto pop = init_population(w.pretrained, cfg, w.validation);
    for (const auto& g : pop.genomes) CHECK(g == w.pretrained);
  }
  SUBCASE("rejects pruned or untrained genomes") {
    RngStream rng(1);
    CHECK_THROWS_AS(init_population(mutate(w.pretrained, 0.5, 0.5, rng), cfg, w.validation), Error);
    CHECK_THROWS_AS(init_population(Genome::dense(w.arch, zero_params(w.arch)), cfg, w.validation),
                    Error);
  }
}

TEST_CASE("step keeps the elite and the population size") {
  const auto& w = world();
  auto cfg = w.config();
  auto pop = init_population(w.pretrained, cfg, w.validation);
  for (std::size_t i = 0; i < 50; ++i) {
    const Genome elite = pop.elite_genome();
    const double elite_f = pop.fitness[pop.elite];
    auto next = step(pop, cfg, w.validation);
    CHECK(next.genomes.size() == cfg.population);
    CHECK(next.generation == pop.generation + 1);
    CHECK(next.genomes.back() == elite);
    CHECK(next.fitness[next.elite] <= elite_f);
    for (const auto& g : next.genomes) CHECK(masks_consistent(g));
    pop = std::move(next);
  }
}

TEST_CASE("evaluation order and thread count do not change results") {
  const auto& w = world();
  auto cfg = w.config();
  auto a = init_population(w.pretrained, cfg, w.validation);
  cfg.threads = 3;
  auto b = init_population(w.pretrained, cfg, w.validation);
  CHECK(a.fitness == b.fitness);
  a = step(a, cfg, w.validation);
  b = step(b, cfg, w.validation);
  CHECK(a.fitness == b.fitness);
  CHECK(a.elite == b.elite);
}

TEST_CASE("retrain_and_reseed") {
  const auto& w = world();
  auto cfg = w.config();
  auto pop = init_population(w.pretrained, cfg, w.validation);
  for (int i = 0; i < 3; ++i) pop = step(pop, cfg, w.validation);
  const auto before = pop.elite_genome();
  const auto next = retrain_and_reseed(pop, cfg, w.fit, w.validation);

  CHECK(next.genomes.size() == cfg.population);
  const auto& trained = next.genomes.back();
  CHECK(trained.masks() == before.masks());
  CHECK(count_sparsity(trained) == count_sparsity(before));
  CHECK(count_flops(trained).remaining == count_flops(before).remaining);
  CHECK_FALSE(trained.params() == before.params());
  for (std::size_t i = 0; i + 1 < next.genomes.size(); ++i) {
    const auto& g = next.genomes[i];
    CHECK(masks_consistent(g));
    // Every mutant is pruned from the trained elite.
    for (std::size_t p = 0; p < g.layer_count(); ++p)
      for (std::size_t j = 0; j < g.masks()[p].size(); ++j)
        if (g.masks()[p][j]) CHECK(trained.masks()[p][j]);
  }
  // Closure: masked weights are exactly zero.
  for (std::size_t p = 0; p < trained.layer_count(); ++p) {
    const auto v = trained.params()[p].values();
    for (std::size_t j = 0; j < v.size(); ++j)
      if (!trained.masks()[p][j]) CHECK(v[j] == 0.0);
  }
}

TEST_CASE("run") {
  const auto& w = world();

  SUBCASE("one generation with zero rates returns the retrained pretrained genome") {
    auto cfg = w.config();
    cfg.max_generations = 1;
    cfg.conv_mutation_rate = 0.0;
    cfg.fc_mutation_rate = 0.0;
    const auto r = run(w.pretrained, cfg, w.fit, w.validation);
    CHECK(r.records.size() == 1);
    CHECK(r.best.masks() == w.pretrained.masks());
    auto t = cfg.final_train;
    t.seed = RngStream::derive(cfg.seed, 2, 0, StreamTag::shuffle);
    CHECK(r.best.params() ==
          train_masked(w.arch, w.pretrained.params(), w.pretrained.masks(), w.fit, t));
  }
  SUBCASE("elite fitness never rises between retrains and reruns are identical") {
    auto cfg = w.config();
    cfg.max_generations = 12;
    cfg.retrain_interval = 4;
    std::vector<bool> consistent;
    const auto r = run(w.pretrained, cfg, w.fit, w.validation,
                       [&](const GenerationRecord&, const Population& pop) {
                         bool ok = pop.genomes.size() == cfg.population;
                         for (const auto& g : pop.genomes) ok = ok && masks_consistent(g);
                         consistent.push_back(ok);
                       });
    REQUIRE(r.records.size() == 12);
    for (bool ok : consistent) CHECK(ok);
    for (std::size_t i = 1; i < r.records.size(); ++i) {
      if (r.records[i].retrained) continue;  // retraining may move the elite either way
      CHECK(r.records[i].elite.fitness <= r.records[i - 1].elite.fitness);
    }
    CHECK(r.records[3].retrained);
    CHECK_FALSE(r.records[4].retrained);

    const auto again = run(w.pretrained, cfg, w.fit, w.validation);
    CHECK(same_records(r.records, again.records));
    CHECK(again.best == r.best);
  }
  SUBCASE("stops once retrained fitness stalls") {
    auto cfg = w.config();
    cfg.max_generations = 200;
    cfg.retrain_interval = 1;
    cfg.convergence_window = 1;
    cfg.convergence_threshold = 1.0;  // any improvement below 1 counts as stalled
    const auto r = run(w.pretrained, cfg, w.fit, w.validation);
    CHECK(r.converged);
    CHECK(r.records.size() == 2);
  }
}
