#pragma once

#include <cstdint>
#include <random>

namespace evoprune {

// Operator tags used to label independent random streams.
enum class StreamTag : std::uint64_t {
  init_weights = 1,
  shuffle = 2,
  mutate = 3,
  crossover = 4,
  reproduce = 5,
  reseed = 6,
  split = 7,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// A random stream identified by (master seed, generation, slot, tag).
// Identical labels always reproduce the identical sequence, independently
// of how many other streams were drawn before.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  RngStream(std::uint64_t master, std::uint64_t generation, std::uint64_t slot,
            StreamTag tag)
      : engine_(derive(master, generation, slot, tag)) {}

  static constexpr std::uint64_t derive(std::uint64_t master, std::uint64_t generation,
                                        std::uint64_t slot, StreamTag tag) noexcept {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ generation);
    h = splitmix64(h ^ (slot * 0xd6e8feb86659fd93ULL));
    return splitmix64(h ^ static_cast<std::uint64_t>(tag));
  }

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // True with probability p; p <= 0 never, p >= 1 always.
  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n), unbiased. n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace evoprune
