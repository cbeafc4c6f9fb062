#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "tensor.hpp"

namespace evoprune {

struct ConvSpec {
  std::size_t filters = 0;
  std::size_t channels = 0;
  std::size_t kernel = 0;  // square kernels only
  std::size_t stride = 1;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct ReluSpec {
  friend bool operator==(const ReluSpec&, const ReluSpec&) = default;
};

struct PoolSpec {
  std::size_t window = 2;
  std::size_t stride = 2;
  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

struct FcSpec {
  std::size_t outputs = 0;
  std::size_t inputs = 0;
  friend bool operator==(const FcSpec&, const FcSpec&) = default;
};

using LayerSpec = std::variant<ConvSpec, ReluSpec, PoolSpec, FcSpec>;

// Activation shape of a single sample.
struct ActShape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t size() const noexcept { return channels * height * width; }
  friend bool operator==(const ActShape&, const ActShape&) = default;
};

inline std::size_t conv_output_size(std::size_t input, std::size_t kernel,
                                    std::size_t stride) {
  return (input - kernel) / stride + 1;
}

// Static description of a feed-forward CNN. Validated on construction:
// adjacent shapes compose and the network ends in a 10-way FC classifier.
class NetworkArch {
 public:
  static constexpr std::size_t num_classes = 10;

  NetworkArch() = default;
  NetworkArch(ActShape input, std::vector<LayerSpec> layers);

  // conv(20x1x5x5) -> pool2 -> conv(50x20x5x5) -> pool2 -> fc(500x800) -> fc(10x500)
  static NetworkArch lenet();

  const ActShape& input() const noexcept { return input_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }

  // shapes()[i] is the input to layers()[i]; shapes().back() is the output.
  const std::vector<ActShape>& shapes() const noexcept { return shapes_; }

  // Indices into layers() of the parametric (conv / fc) layers, in order.
  const std::vector<std::size_t>& param_layers() const noexcept { return param_layers_; }
  std::size_t param_count() const noexcept { return param_layers_.size(); }

  bool is_conv(std::size_t param) const {
    return std::holds_alternative<ConvSpec>(layers_[param_layers_[param]]);
  }
  const ConvSpec& conv(std::size_t param) const {
    return std::get<ConvSpec>(layers_[param_layers_[param]]);
  }
  const FcSpec& fc(std::size_t param) const {
    return std::get<FcSpec>(layers_[param_layers_[param]]);
  }
  // Input and output activation shapes of a parametric layer.
  const ActShape& param_input(std::size_t param) const {
    return shapes_[param_layers_[param]];
  }
  const ActShape& param_output(std::size_t param) const {
    return shapes_[param_layers_[param] + 1];
  }

  // Number of weights (biases excluded) of a parametric layer.
  std::size_t weight_count(std::size_t param) const;
  std::size_t bias_count(std::size_t param) const;

  // Dense multiply-accumulate count of a parametric layer.
  std::size_t dense_macs(std::size_t param) const;

  friend bool operator==(const NetworkArch& a, const NetworkArch& b) {
    return a.input_ == b.input_ && a.layers_ == b.layers_;
  }

 private:
  ActShape input_;
  std::vector<LayerSpec> layers_;
  std::vector<ActShape> shapes_;
  std::vector<std::size_t> param_layers_;
};

}  // namespace evoprune
