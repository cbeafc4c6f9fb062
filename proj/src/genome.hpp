#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "arch.hpp"
#include "nn.hpp"
#include "rng.hpp"

namespace evoprune {

// Scalarization coefficients (lambda1, lambda2, lambda3) for error,
// remaining computation and density.
struct FitnessWeights {
  double error = 0.3;
  double computation = 0.4;
  double sparsity = 0.3;

  void validate() const;
  friend bool operator==(const FitnessWeights&, const FitnessWeights&) = default;
};

struct Metrics {
  double error = 0.0;        // e
  double computation = 1.0;  // c
  double sparsity = 0.0;     // s
  double fitness = 0.0;      // f = l1*e + l2*c + l3*(1 - s)
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

// One candidate network: per-layer weights (genes) with same-shaped binary
// masks. Copyable value; operators below return new genomes.
class Genome {
 public:
  struct Cache {
    Metrics metrics;
    FitnessWeights weights;
    std::uint64_t dataset_id = 0;
  };

  Genome() = default;
  Genome(NetworkArch arch, Params params, Masks masks);
  // All-ones masks.
  static Genome dense(NetworkArch arch, Params params);

  const NetworkArch& arch() const noexcept { return arch_; }
  const Params& params() const noexcept { return params_; }
  const Masks& masks() const noexcept { return masks_; }
  std::size_t layer_count() const noexcept { return params_.size(); }

  // Mutable access drops any cached metrics.
  Params& mutable_params() {
    cache_.reset();
    return params_;
  }
  Masks& mutable_masks() {
    cache_.reset();
    return masks_;
  }
  void replace_params(Params params);

  // Copies layer `layer` (weights, bias and mask) from donor.
  void copy_gene(std::size_t layer, const Genome& donor);

  // Per-filter liveness of a conv layer: a filter is alive while any of its
  // weights is unmasked.
  std::vector<std::uint8_t> alive_filters(std::size_t layer) const;

  bool is_dense() const;

  const std::optional<Cache>& cache() const noexcept { return cache_; }
  void set_cache(Cache cache) { cache_ = cache; }
  void clear_cache() noexcept { cache_.reset(); }

  // Weights, biases and masks equal; cache ignored.
  friend bool operator==(const Genome& a, const Genome& b) {
    return a.arch_ == b.arch_ && a.params_ == b.params_ && a.masks_ == b.masks_;
  }

 private:
  NetworkArch arch_;
  Params params_;
  Masks masks_;
  std::optional<Cache> cache_;
};

// Filter-wise pruning of conv layers with probability conv_rate per alive
// filter and connection-wise pruning of FC layers with probability fc_rate
// per alive weight. Prune-only; the result is propagated and masked.
Genome mutate(const Genome& genome, double conv_rate, double fc_rate, RngStream& rng);

// Dead filter f of a conv layer masks input channel f of the next conv
// layer, or the FC columns reading feature map f when the next parametric
// layer is fully connected. Idempotent.
Genome propagate_masks(Genome genome);

// weights <- weights * mask.
Genome apply_masks(Genome genome);

// Throws inconsistent_masks unless every conv mask factors as
// (alive filter) x (alive input channel) and propagation holds.
void check_mask_consistency(const Genome& genome);
bool masks_consistent(const Genome& genome);

// Binary checkpoint: "EVOPRUNE", version, architecture, then per layer the
// weights (f64 LE), mask bytes and biases (f64 LE).
inline constexpr std::uint32_t checkpoint_version = 1;
void save_checkpoint(const Genome& genome, const std::filesystem::path& path);
Genome load_checkpoint(const std::filesystem::path& path);

}  // namespace evoprune
