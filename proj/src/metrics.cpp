#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace evoprune {

void FitnessWeights::validate() const {
  for (double l : {error, computation, sparsity})
    require(std::isfinite(l) && l >= 0.0 && l <= 1.0, ErrorCode::config,
            "fitness weights must each lie in [0, 1]");
  const double sum = error + computation + sparsity;
  require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::config,
          "fitness weights must sum to 1 (got " + std::to_string(sum) + ")");
}

FlopCount count_flops(const Genome& genome) {
  check_mask_consistency(genome);
  const auto& arch = genome.arch();
  FlopCount count;
  for (std::size_t p = 0; p < arch.param_count(); ++p) {
    count.dense += arch.dense_macs(p);
    const auto& mask = genome.masks()[p];
    if (arch.is_conv(p)) {
      const auto& c = arch.conv(p);
      const auto filters = genome.alive_filters(p);
      const std::size_t kk = c.kernel * c.kernel;
      std::uint64_t alive_channels = 0;
      for (std::size_t ch = 0; ch < c.channels; ++ch) {
        bool alive = false;
        for (std::size_t f = 0; f < c.filters && !alive; ++f)
          alive = mask[(f * c.channels + ch) * kk] != 0;
        alive_channels += alive;
      }
      const auto alive_filters =
          static_cast<std::uint64_t>(std::count(filters.begin(), filters.end(), std::uint8_t{1}));
      const auto& out = arch.param_output(p);
      count.remaining += alive_filters * alive_channels * kk * out.height * out.width;
    } else {
      count.remaining += static_cast<std::uint64_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
    }
  }
  return count;
}

double count_sparsity(const Genome& genome) {
  std::uint64_t total = 0;
  std::uint64_t pruned = 0;
  for (const auto& mask : genome.masks()) {
    total += mask.size();
    pruned += static_cast<std::uint64_t>(std::count(mask.begin(), mask.end(), std::uint8_t{0}));
  }
  return total == 0 ? 0.0 : static_cast<double>(pruned) / static_cast<double>(total);
}

double scalarize(const FitnessWeights& w, double error, double computation, double sparsity) {
  return w.error * error + w.computation * computation + w.sparsity * (1.0 - sparsity);
}

Metrics measure(const Genome& genome, const FitnessWeights& weights, const Dataset& eval) {
  weights.validate();
  require(!eval.empty(), ErrorCode::invalid_argument, "fitness needs a nonempty evaluation set");
  Metrics m;
  m.computation = count_flops(genome).fraction();
  m.sparsity = count_sparsity(genome);
  m.error = predict_error(genome.arch(), genome.params(), genome.masks(), eval);
  m.fitness = scalarize(weights, m.error, m.computation, m.sparsity);
  return m;
}

Metrics fitness(Genome& genome, const FitnessWeights& weights, const Dataset& eval) {
  if (const auto& cache = genome.cache();
      cache && cache->weights == weights && cache->dataset_id == eval.id()) {
    return cache->metrics;
  }
  const auto m = measure(genome, weights, eval);
  genome.set_cache({m, weights, eval.id()});
  return m;
}

}  // namespace evoprune
