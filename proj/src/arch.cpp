#include "arch.hpp"

#include <string>

namespace evoprune {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

NetworkArch::NetworkArch(ActShape input, std::vector<LayerSpec> layers)
    : input_(input), layers_(std::move(layers)) {
  require(input_.size() > 0, ErrorCode::invalid_argument, "empty network input shape");
  require(!layers_.empty(), ErrorCode::invalid_argument, "network has no layers");

  shapes_.reserve(layers_.size() + 1);
  shapes_.push_back(input_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const ActShape in = shapes_.back();
    const auto where = "layer " + std::to_string(i) + ": ";
    ActShape out = std::visit(
        overloaded{
            [&](const ConvSpec& c) {
              require(c.filters > 0 && c.kernel > 0 && c.stride > 0,
                      ErrorCode::invalid_argument, where + "degenerate conv");
              require(c.channels == in.channels, ErrorCode::shape_mismatch,
                      where + "conv channel count does not match its input");
              require(in.height >= c.kernel && in.width >= c.kernel,
                      ErrorCode::shape_mismatch, where + "conv kernel larger than input");
              require((in.height - c.kernel) % c.stride == 0 &&
                          (in.width - c.kernel) % c.stride == 0,
                      ErrorCode::shape_mismatch, where + "stride does not tile the input");
              param_layers_.push_back(i);
              return ActShape{c.filters, conv_output_size(in.height, c.kernel, c.stride),
                              conv_output_size(in.width, c.kernel, c.stride)};
            },
            [&](const ReluSpec&) { return in; },
            [&](const PoolSpec& p) {
              require(p.window > 0 && p.stride > 0, ErrorCode::invalid_argument,
                      where + "degenerate pooling");
              require(in.height >= p.window && in.width >= p.window &&
                          (in.height - p.window) % p.stride == 0 &&
                          (in.width - p.window) % p.stride == 0,
                      ErrorCode::shape_mismatch, where + "pooling does not tile the input");
              return ActShape{in.channels, conv_output_size(in.height, p.window, p.stride),
                              conv_output_size(in.width, p.window, p.stride)};
            },
            [&](const FcSpec& f) {
              require(f.outputs > 0, ErrorCode::invalid_argument, where + "empty fc layer");
              require(f.inputs == in.size(), ErrorCode::shape_mismatch,
                      where + "fc input count does not match the flattened input");
              param_layers_.push_back(i);
              return ActShape{f.outputs, 1, 1};
            },
        },
        layers_[i]);
    shapes_.push_back(out);
  }

  require(std::holds_alternative<FcSpec>(layers_.back()), ErrorCode::invalid_argument,
          "network must end in a fully-connected classifier");
  require(std::get<FcSpec>(layers_.back()).outputs == num_classes,
          ErrorCode::invalid_argument, "classifier must have 10 outputs");
}

NetworkArch NetworkArch::lenet() {
  return NetworkArch({1, 28, 28}, {
                                      ConvSpec{20, 1, 5, 1},
                                      ReluSpec{},
                                      PoolSpec{2, 2},
                                      ConvSpec{50, 20, 5, 1},
                                      ReluSpec{},
                                      PoolSpec{2, 2},
                                      FcSpec{500, 800},
                                      ReluSpec{},
                                      FcSpec{10, 500},
                                  });
}

std::size_t NetworkArch::weight_count(std::size_t param) const {
  if (is_conv(param)) {
    const auto& c = conv(param);
    return c.filters * c.channels * c.kernel * c.kernel;
  }
  const auto& f = fc(param);
  return f.outputs * f.inputs;
}

std::size_t NetworkArch::bias_count(std::size_t param) const {
  return is_conv(param) ? conv(param).filters : fc(param).outputs;
}

std::size_t NetworkArch::dense_macs(std::size_t param) const {
  if (is_conv(param)) {
    const auto& out = param_output(param);
    return weight_count(param) * out.height * out.width;
  }
  return weight_count(param);
}

}  // namespace evoprune
