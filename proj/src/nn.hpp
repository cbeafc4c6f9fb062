#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "arch.hpp"
#include "mnist.hpp"
#include "tensor.hpp"

namespace evoprune {

// Conv layers hold a Tensor4 (F, C, K, K); FC layers a Tensor2 (O, I).
using Weights = std::variant<Tensor4, Tensor2>;

struct LayerParams {
  Weights weights;
  std::vector<double> bias;

  std::span<double> values() {
    return std::visit([](auto& t) { return t.data(); }, weights);
  }
  std::span<const double> values() const {
    return std::visit([](const auto& t) { return std::span<const double>(t.data()); }, weights);
  }
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

using Params = std::vector<LayerParams>;

// One byte per weight; 1 = alive, 0 = pruned.
using Mask = std::vector<std::uint8_t>;
using Masks = std::vector<Mask>;

Params zero_params(const NetworkArch& arch);
// He-uniform weights, zero biases.
Params init_params(const NetworkArch& arch, std::uint64_t seed);
Masks full_masks(const NetworkArch& arch, std::uint8_t value = 1);

// Throws shape_mismatch unless params (and masks, if given) fit arch.
void check_params(const NetworkArch& arch, const Params& params, const Masks* masks = nullptr);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double lr_decay = 0.1;
  // Epoch e runs at learning_rate * lr_decay once e >= decay_at * epochs.
  double decay_at = 2.0 / 3.0;
  // 0 = use every sample each epoch.
  std::size_t samples_per_epoch = 0;
  std::uint64_t seed = 0;

  void validate() const;
  double rate_for_epoch(std::size_t epoch) const;
};

// Reference kernels over whole batches. No padding.
Tensor4 conv2d_forward(const Tensor4& input, const Tensor4& weights,
                       std::span<const double> bias, std::size_t stride = 1);

struct PoolResult {
  Tensor4 output;
  // Flat index into the input tensor of each output's maximum; ties resolve
  // to the first element in row-major window order.
  std::vector<std::size_t> argmax;
};
PoolResult maxpool_forward(const Tensor4& input, std::size_t window, std::size_t stride);

std::vector<double> fc_forward(std::span<const double> input, const Tensor2& weights,
                               std::span<const double> bias);

std::vector<double> softmax(std::span<const double> logits);

struct Batch {
  Tensor4 inputs;  // (samples, channels, height, width)
  std::vector<int> labels;
};

struct LossAndGrads {
  double loss = 0.0;  // mean softmax cross-entropy
  Params grads;       // shape-matched to params, averaged over the batch
};

// With masks, pruned weights are treated as absent and get zero gradient.
LossAndGrads loss_and_backward(const NetworkArch& arch, const Params& params,
                               const Batch& batch, const Masks* masks = nullptr);

std::vector<double> forward_logits(const NetworkArch& arch, const Params& params,
                                   const Masks& masks, std::span<const double> image);

// Epoch-end callback: (epoch index, mean training loss of the epoch).
using TrainObserver = std::function<void(std::size_t, double)>;

// Momentum SGD that keeps every pruned weight exactly zero after each update.
Params train_masked(const NetworkArch& arch, Params params, const Masks& masks,
                    const Dataset& data, const TrainConfig& cfg,
                    const TrainObserver& observer = {});

// Mean training loss over a dataset, for diagnostics and tests.
double mean_loss(const NetworkArch& arch, const Params& params, const Masks& masks,
                 const Dataset& data);

// Fraction of misclassified samples; predicted class = first argmax of logits.
double predict_error(const NetworkArch& arch, const Params& params, const Masks& masks,
                     const Dataset& data);

}  // namespace evoprune
