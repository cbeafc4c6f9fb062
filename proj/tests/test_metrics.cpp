#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "metrics.hpp"
#include "oracles.hpp"

using namespace testing;

TEST_CASE("dense LeNet FLOPs") {
  const auto lenet = NetworkArch::lenet();
  CHECK(lenet.dense_macs(0) == 288000);
  CHECK(lenet.dense_macs(1) == 1600000);
  CHECK(lenet.dense_macs(2) == 400000);
  CHECK(lenet.dense_macs(3) == 5000);
  const auto g = random_genome(lenet, 1);
  const auto f = count_flops(g);
  CHECK(f.dense == 2293000);
  CHECK(f.remaining == 2293000);
  CHECK(f.fraction() == 1.0);
  CHECK(brute_force_macs(g) == 2293000);
  CHECK(count_sparsity(g) == 0.0);
}

TEST_CASE("all masks zero") {
  const auto lenet = NetworkArch::lenet();
  const Genome g(lenet, init_params(lenet, 2), full_masks(lenet, 0));
  CHECK(count_flops(g).remaining == 0);
  CHECK(count_flops(g).fraction() == 0.0);
  CHECK(count_sparsity(g) == 1.0);
}

TEST_CASE("count_flops equals the brute-force walker on random genomes") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(seed, 0, 0, StreamTag::mutate);
    const auto arch = two_conv_arch(1 + rng.below(5), 1 + rng.below(6), 1 + rng.below(8));
    const auto g = mutate(random_genome(arch, seed), rng.uniform(0.0, 0.6), rng.uniform(0.0, 0.6), rng);
    const auto f = count_flops(g);
    CHECK(f.remaining == brute_force_macs(g));
    CHECK(f.dense == brute_force_macs(g, true));
  }
}

TEST_CASE("count_flops rejects inconsistent masks") {
  const auto lenet = NetworkArch::lenet();
  auto g = random_genome(lenet, 3);
  std::fill(g.mutable_masks()[0].begin(), g.mutable_masks()[0].begin() + 25, std::uint8_t{0});
  CHECK_THROWS_AS(count_flops(g), Error);
}

TEST_CASE("pruning more never raises c or lowers s") {
  const auto arch = two_conv_arch(4, 5, 6);
  auto g = random_genome(arch, 4);
  double c = 1.0;
  double s = 0.0;
  for (std::size_t i = 0; i < 40; ++i) {
    RngStream rng(9, i, 0, StreamTag::mutate);
    g = mutate(g, 0.05, 0.05, rng);
    const double c2 = count_flops(g).fraction();
    const double s2 = count_sparsity(g);
    CHECK(c2 <= c);
    CHECK(s2 >= s);
    c = c2;
    s = s2;
  }
}

TEST_CASE("fitness arithmetic") {
  SUBCASE("reference row (0.3, 0.4, 0.3)") {
    const double f = scalarize({0.3, 0.4, 0.3}, 0.0093, 0.0622, 0.9430);
    CHECK(std::abs(f - 0.04477) <= 1e-9);
  }
  SUBCASE("error-only weights and a perfect classifier") {
    CHECK(scalarize({1.0, 0.0, 0.0}, 0.0, 0.3, 0.5) == 0.0);
  }
  SUBCASE("sparsity-only weights on a dense genome") {
    CHECK(scalarize({0.0, 0.0, 1.0}, 0.2, 1.0, 0.0) == 1.0);
  }
  SUBCASE("bounded in [0, 1]") {
    RngStream rng(5);
    for (int i = 0; i < 1000; ++i) {
      const double a = rng.uniform();
      const double b = rng.uniform() * (1.0 - a);
      const double f = scalarize({a, b, 1.0 - a - b}, rng.uniform(), rng.uniform(), rng.uniform());
      CHECK(f >= 0.0);
      CHECK(f <= 1.0 + 1e-15);
    }
  }
}

TEST_CASE("fitness weights validation") {
  CHECK_NOTHROW(FitnessWeights{0.3, 0.4, 0.3}.validate());
  CHECK_NOTHROW(FitnessWeights{0.5, 0.5, 0.0}.validate());
  CHECK_THROWS_AS(FitnessWeights({0.4, 0.3, 0.2}).validate(), Error);
  CHECK_THROWS_AS(FitnessWeights({1.2, -0.2, 0.0}).validate(), Error);
  CHECK_THROWS_AS(FitnessWeights({NAN, 0.5, 0.5}).validate(), Error);
}

TEST_CASE("fitness evaluates and caches") {
  const auto arch = tiny_arch();
  auto params = zero_params(arch);
  params.back().bias[0] = 1.0;  // always predicts class 0
  Genome g = Genome::dense(arch, params);
  const auto data = blob_dataset(20, 8, 1);  // labels cycle 0..9

  const FitnessWeights w{0.5, 0.25, 0.25};
  const auto m = fitness(g, w, data);
  CHECK(m.error == doctest::Approx(0.9));
  CHECK(m.computation == 1.0);
  CHECK(m.sparsity == 0.0);
  CHECK(m.fitness == doctest::Approx(0.5 * 0.9 + 0.25 + 0.25));
  REQUIRE(g.cache().has_value());
  CHECK(g.cache()->metrics == m);

  SUBCASE("another weight vector re-evaluates") {
    const auto m2 = fitness(g, {1.0, 0.0, 0.0}, data);
    CHECK(m2.fitness == doctest::Approx(0.9));
  }
  SUBCASE("mutable access drops the cache") {
    g.mutable_params();
    CHECK_FALSE(g.cache().has_value());
  }
  SUBCASE("empty evaluation set is rejected") {
    Genome h = Genome::dense(arch, params);
    CHECK_THROWS_AS(fitness(h, w, Dataset{}), Error);
  }
}
