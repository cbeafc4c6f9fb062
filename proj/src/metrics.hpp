#pragma once

#include <cstdint>

#include "genome.hpp"
#include "mnist.hpp"

namespace evoprune {

struct FlopCount {
  std::uint64_t remaining = 0;  // multiply-accumulates left after pruning
  std::uint64_t dense = 0;      // same network with nothing pruned
  double fraction() const {
    return dense == 0 ? 0.0 : static_cast<double>(remaining) / static_cast<double>(dense);
  }
};

// Conv layers: alive filters x alive input channels x K^2 x output positions.
// FC layers: alive weights. Pooling and activations are free. Throws
// inconsistent_masks if the genome's masks are not propagated.
FlopCount count_flops(const Genome& genome);

// Fraction of masked weights over all conv and FC layers, biases excluded.
double count_sparsity(const Genome& genome);

double scalarize(const FitnessWeights& weights, double error, double computation,
                 double sparsity);

// Evaluates e on `eval`, c and s from the masks, and caches the result on
// the genome keyed by (weights, dataset). A cache hit skips evaluation.
Metrics fitness(Genome& genome, const FitnessWeights& weights, const Dataset& eval);

// Same as fitness() without touching the cache.
Metrics measure(const Genome& genome, const FitnessWeights& weights, const Dataset& eval);

}  // namespace evoprune
