#include "nn.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "rng.hpp"

namespace evoprune {

namespace {

// Alive weight offsets per output unit (filter or FC row). A row whose
// weights are all alive is flagged dense and iterated without indices.
struct RowPlan {
  std::vector<std::uint32_t> offsets;  // concatenated alive offsets
  std::vector<std::size_t> begin;      // rows + 1 entries into offsets
  std::vector<std::uint8_t> dense;

  static RowPlan build(std::size_t rows, std::size_t width, const Mask* mask) {
    RowPlan plan;
    plan.begin.reserve(rows + 1);
    plan.dense.assign(rows, 1);
    plan.begin.push_back(0);
    for (std::size_t r = 0; r < rows; ++r) {
      if (mask != nullptr) {
        const auto* m = mask->data() + r * width;
        const auto alive = static_cast<std::size_t>(std::count(m, m + width, std::uint8_t{1}));
        if (alive != width) {
          plan.dense[r] = 0;
          for (std::size_t k = 0; k < width; ++k)
            if (m[k]) plan.offsets.push_back(static_cast<std::uint32_t>(k));
        }
      }
      plan.begin.push_back(plan.offsets.size());
    }
    return plan;
  }

  std::span<const std::uint32_t> sparse_row(std::size_t r) const {
    return {offsets.data() + begin[r], begin[r + 1] - begin[r]};
  }
};

struct ConvGeometry {
  std::size_t channels, height, width;  // input
  std::size_t kernel, stride;
  std::size_t out_h, out_w;

  std::size_t patch() const { return channels * kernel * kernel; }
  std::size_t positions() const { return out_h * out_w; }
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One conv layer on one sample as a dense product over the alive part of
// the layer: filters with any alive weight, and patch rows (c, kh, kw) with
// any alive weight. Pruned weights enter the packed matrix as zero.
class ConvKernel {
 public:
  ConvKernel(const ConvGeometry& g, std::size_t filters, const Mask* mask)
      : g_(g), filters_(filters), mask_(mask) {
    const std::size_t patch = g.patch();
    if (mask == nullptr) {
      alive_filters_.resize(filters);
      std::iota(alive_filters_.begin(), alive_filters_.end(), 0U);
      alive_rows_.resize(patch);
      std::iota(alive_rows_.begin(), alive_rows_.end(), 0U);
    } else {
      std::vector<std::uint8_t> row_alive(patch, 0);
      for (std::size_t f = 0; f < filters; ++f) {
        const auto* m = mask->data() + f * patch;
        bool any = false;
        for (std::size_t k = 0; k < patch; ++k) {
          if (m[k]) {
            any = true;
            row_alive[k] = 1;
          }
        }
        if (any) alive_filters_.push_back(static_cast<std::uint32_t>(f));
      }
      for (std::size_t k = 0; k < patch; ++k)
        if (row_alive[k]) alive_rows_.push_back(static_cast<std::uint32_t>(k));
    }
    const auto fa = static_cast<Eigen::Index>(alive_filters_.size());
    const auto ka = static_cast<Eigen::Index>(alive_rows_.size());
    const auto positions = static_cast<Eigen::Index>(g.positions());
    col_.resize(ka, positions);
    packed_.resize(fa, ka);
    out_.resize(fa, positions);
  }

  void forward(const double* weights, const double* bias, const double* in, double* out) {
    const std::size_t P = g_.positions();
    for (std::size_t f = 0; f < filters_; ++f) std::fill(out + f * P, out + (f + 1) * P, bias[f]);
    if (alive_filters_.empty() || alive_rows_.empty()) return;
    pack(weights);
    im2col(in);
    out_.noalias() = packed_ * col_;
    for (std::size_t i = 0; i < alive_filters_.size(); ++i) {
      double* o = out + alive_filters_[i] * P;
      const double* r = out_.data() + i * P;
      for (std::size_t p = 0; p < P; ++p) o[p] += r[p];
    }
  }

  // Uses the col buffer and packed weights of the preceding forward().
  void backward(const double* d_out, double* grad_w, double* grad_b, double* d_in) {
    const std::size_t P = g_.positions();
    const std::size_t patch = g_.patch();
    for (std::size_t f = 0; f < filters_; ++f) {
      const double* d = d_out + f * P;
      grad_b[f] += std::accumulate(d, d + P, 0.0);
    }
    if (d_in != nullptr) std::fill(d_in, d_in + g_.channels * g_.height * g_.width, 0.0);
    if (alive_filters_.empty() || alive_rows_.empty()) return;

    for (std::size_t i = 0; i < alive_filters_.size(); ++i) {
      const double* d = d_out + alive_filters_[i] * P;
      std::copy(d, d + P, out_.data() + i * P);
    }
    grad_packed_.noalias() = out_ * col_.transpose();
    for (std::size_t i = 0; i < alive_filters_.size(); ++i) {
      const std::size_t base = alive_filters_[i] * patch;
      for (std::size_t j = 0; j < alive_rows_.size(); ++j) {
        const std::size_t idx = base + alive_rows_[j];
        if (mask_ == nullptr || (*mask_)[idx]) grad_w[idx] += grad_packed_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
    if (d_in != nullptr) {
      d_col_.noalias() = packed_.transpose() * out_;
      col2im_add(d_in);
    }
  }

 private:
  void pack(const double* weights) {
    const std::size_t patch = g_.patch();
    for (std::size_t i = 0; i < alive_filters_.size(); ++i) {
      const std::size_t base = alive_filters_[i] * patch;
      double* dst = packed_.data() + i * alive_rows_.size();
      for (std::size_t j = 0; j < alive_rows_.size(); ++j) {
        const std::size_t idx = base + alive_rows_[j];
        dst[j] = (mask_ == nullptr || (*mask_)[idx]) ? weights[idx] : 0.0;
      }
    }
  }

  // Row j of col_ holds input patch element alive_rows_[j] = (c, kh, kw)
  // for every output position p = (y, x).
  void im2col(const double* in) {
    const std::size_t P = g_.positions();
    const std::size_t kk = g_.kernel * g_.kernel;
    for (std::size_t j = 0; j < alive_rows_.size(); ++j) {
      const std::size_t k = alive_rows_[j];
      const std::size_t c = k / kk, kh = (k % kk) / g_.kernel, kw = k % g_.kernel;
      const double* plane = in + c * g_.height * g_.width;
      double* row = col_.data() + j * P;
      for (std::size_t y = 0; y < g_.out_h; ++y) {
        const double* src = plane + (y * g_.stride + kh) * g_.width + kw;
        double* dst = row + y * g_.out_w;
        if (g_.stride == 1) {
          std::copy(src, src + g_.out_w, dst);
        } else {
          for (std::size_t x = 0; x < g_.out_w; ++x) dst[x] = src[x * g_.stride];
        }
      }
    }
  }

  void col2im_add(double* in) const {
    const std::size_t P = g_.positions();
    const std::size_t kk = g_.kernel * g_.kernel;
    for (std::size_t j = 0; j < alive_rows_.size(); ++j) {
      const std::size_t k = alive_rows_[j];
      const std::size_t c = k / kk, kh = (k % kk) / g_.kernel, kw = k % g_.kernel;
      double* plane = in + c * g_.height * g_.width;
      const double* row = d_col_.data() + j * P;
      for (std::size_t y = 0; y < g_.out_h; ++y) {
        double* dst = plane + (y * g_.stride + kh) * g_.width + kw;
        const double* src = row + y * g_.out_w;
        for (std::size_t x = 0; x < g_.out_w; ++x) dst[x * g_.stride] += src[x];
      }
    }
  }

  ConvGeometry g_;
  std::size_t filters_;
  const Mask* mask_;
  std::vector<std::uint32_t> alive_filters_;
  std::vector<std::uint32_t> alive_rows_;
  RowMatrix col_, packed_, out_, grad_packed_, d_col_;
};

inline void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

inline double dot(const double* x, const double* y, std::size_t n) {
  using Vec = Eigen::Map<const Eigen::VectorXd>;
  const auto len = static_cast<Eigen::Index>(n);
  return Vec(x, len).dot(Vec(y, len));
}

void fc_forward_sample(const RowPlan& plan, std::size_t inputs, const double* weights,
                       const double* bias, const double* x, double* out) {
  const std::size_t outputs = plan.dense.size();
  for (std::size_t o = 0; o < outputs; ++o) {
    const double* w = weights + o * inputs;
    double s = 0.0;
    if (plan.dense[o]) {
      s = dot(w, x, inputs);
    } else {
      for (auto i : plan.sparse_row(o)) s += w[i] * x[i];
    }
    out[o] = bias[o] + s;
  }
}

void pool_forward_sample(const ActShape& in, const PoolSpec& p, std::size_t out_h,
                         std::size_t out_w, const double* x, double* out, std::size_t* argmax) {
  for (std::size_t c = 0; c < in.channels; ++c) {
    const std::size_t plane = c * in.height * in.width;
    for (std::size_t y = 0; y < out_h; ++y) {
      for (std::size_t xo = 0; xo < out_w; ++xo) {
        std::size_t best = plane + (y * p.stride) * in.width + xo * p.stride;
        for (std::size_t wy = 0; wy < p.window; ++wy) {
          for (std::size_t wx = 0; wx < p.window; ++wx) {
            const std::size_t idx = plane + (y * p.stride + wy) * in.width + xo * p.stride + wx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (c * out_h + y) * out_w + xo;
        out[o] = x[best];
        argmax[o] = best;
      }
    }
  }
}

ConvGeometry geometry(const ConvSpec& c, const ActShape& in, const ActShape& out) {
  return {in.channels, in.height, in.width, c.kernel, c.stride, out.height, out.width};
}

// Forward/backward context for one network on one sample at a time. Owns
// its buffers; writes only to them and to the gradient accumulator passed
// to backward().
class Engine {
 public:
  Engine(const NetworkArch& arch, const Params& params, const Masks* masks)
      : arch_(arch), params_(params) {
    const auto& layers = arch.layers();
    const auto& shapes = arch.shapes();
    acts_.resize(layers.size() + 1);
    deltas_.resize(layers.size() + 1);
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      acts_[i].assign(shapes[i].size(), 0.0);
      deltas_[i].assign(shapes[i].size(), 0.0);
    }
    layer_param_.assign(layers.size(), npos);
    convs_.resize(layers.size());
    fc_plans_.resize(layers.size());
    argmax_.resize(layers.size());
    for (std::size_t p = 0; p < arch.param_count(); ++p) {
      const auto li = arch.param_layers()[p];
      layer_param_[li] = p;
      const Mask* mask = masks ? &(*masks)[p] : nullptr;
      if (arch.is_conv(p)) {
        convs_[li] = std::make_unique<ConvKernel>(
            geometry(arch.conv(p), arch.param_input(p), arch.param_output(p)),
            arch.conv(p).filters, mask);
      } else {
        fc_plans_[li] = RowPlan::build(arch.fc(p).outputs, arch.fc(p).inputs, mask);
      }
    }
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (std::holds_alternative<PoolSpec>(layers[i])) argmax_[i].assign(shapes[i + 1].size(), 0);
    first_param_layer_ = arch.param_layers().front();
  }

  std::span<const double> forward(std::span<const double> image) {
    std::copy(image.begin(), image.end(), acts_[0].begin());
    const auto& layers = arch_.layers();
    const auto& shapes = arch_.shapes();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const double* x = acts_[i].data();
      double* y = acts_[i + 1].data();
      if (std::holds_alternative<ConvSpec>(layers[i])) {
        const auto p = layer_param_[i];
        convs_[i]->forward(params_[p].values().data(), params_[p].bias.data(), x, y);
      } else if (const auto* fc = std::get_if<FcSpec>(&layers[i])) {
        const auto p = layer_param_[i];
        fc_forward_sample(fc_plans_[i], fc->inputs, params_[p].values().data(),
                          params_[p].bias.data(), x, y);
      } else if (const auto* pool = std::get_if<PoolSpec>(&layers[i])) {
        pool_forward_sample(shapes[i], *pool, shapes[i + 1].height, shapes[i + 1].width, x, y,
                            argmax_[i].data());
      } else {
        const auto n = shapes[i].size();
        for (std::size_t j = 0; j < n; ++j) y[j] = x[j] > 0.0 ? x[j] : 0.0;
      }
    }
    return acts_.back();
  }

  // Cross-entropy of the last forward pass; accumulates d(loss)/d(params).
  double backward(int label, Params& grads) {
    const auto& logits = acts_.back();
    auto probs = softmax(logits);
    const double loss = -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300));
    auto& top = deltas_.back();
    for (std::size_t k = 0; k < probs.size(); ++k) top[k] = probs[k];
    top[static_cast<std::size_t>(label)] -= 1.0;

    const auto& layers = arch_.layers();
    const auto& shapes = arch_.shapes();
    for (std::size_t i = layers.size(); i-- > first_param_layer_;) {
      const double* d_out = deltas_[i + 1].data();
      double* d_in = deltas_[i].data();
      const bool need_input = i > first_param_layer_;
      if (std::holds_alternative<ConvSpec>(layers[i])) {
        const auto p = layer_param_[i];
        convs_[i]->backward(d_out, grads[p].values().data(), grads[p].bias.data(),
                            need_input ? d_in : nullptr);
      } else if (const auto* fc = std::get_if<FcSpec>(&layers[i])) {
        fc_backward(i, *fc, d_out, need_input ? d_in : nullptr, grads);
      } else if (std::holds_alternative<PoolSpec>(layers[i])) {
        std::fill(deltas_[i].begin(), deltas_[i].end(), 0.0);
        const auto& am = argmax_[i];
        for (std::size_t j = 0; j < am.size(); ++j) d_in[am[j]] += d_out[j];
      } else {
        const double* y = acts_[i + 1].data();
        const auto n = shapes[i].size();
        for (std::size_t j = 0; j < n; ++j) d_in[j] = y[j] > 0.0 ? d_out[j] : 0.0;
      }
    }
    return loss;
  }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  void fc_backward(std::size_t i, const FcSpec& fc, const double* d_out, double* d_in,
                   Params& grads) {
    const auto p = layer_param_[i];
    const auto& plan = fc_plans_[i];
    const double* x = acts_[i].data();
    const double* w = params_[p].values().data();
    double* gw = grads[p].values().data();
    double* gb = grads[p].bias.data();
    if (d_in != nullptr) std::fill(d_in, d_in + fc.inputs, 0.0);
    for (std::size_t o = 0; o < fc.outputs; ++o) {
      const double d = d_out[o];
      gb[o] += d;
      if (d == 0.0) continue;
      double* grow = gw + o * fc.inputs;
      const double* wrow = w + o * fc.inputs;
      if (plan.dense[o]) {
        axpy(d, x, grow, fc.inputs);
        if (d_in != nullptr) axpy(d, wrow, d_in, fc.inputs);
      } else {
        for (auto k : plan.sparse_row(o)) {
          grow[k] += d * x[k];
          if (d_in != nullptr) d_in[k] += d * wrow[k];
        }
      }
    }
  }

  const NetworkArch& arch_;
  const Params& params_;
  std::vector<std::size_t> layer_param_;
  std::vector<std::unique_ptr<ConvKernel>> convs_;
  std::vector<RowPlan> fc_plans_;
  std::vector<std::vector<double>> acts_;
  std::vector<std::vector<double>> deltas_;
  std::vector<std::vector<std::size_t>> argmax_;
  std::size_t first_param_layer_ = 0;
};

void zero(Params& params) {
  for (auto& lp : params) {
    auto v = lp.values();
    std::fill(v.begin(), v.end(), 0.0);
    std::fill(lp.bias.begin(), lp.bias.end(), 0.0);
  }
}

std::size_t first_argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

Params zero_params(const NetworkArch& arch) {
  Params params;
  params.reserve(arch.param_count());
  for (std::size_t p = 0; p < arch.param_count(); ++p) {
    if (arch.is_conv(p)) {
      const auto& c = arch.conv(p);
      params.push_back({Tensor4({c.filters, c.channels, c.kernel, c.kernel}),
                        std::vector<double>(c.filters, 0.0)});
    } else {
      const auto& f = arch.fc(p);
      params.push_back({Tensor2(f.outputs, f.inputs), std::vector<double>(f.outputs, 0.0)});
    }
  }
  return params;
}

Params init_params(const NetworkArch& arch, std::uint64_t seed) {
  Params params = zero_params(arch);
  for (std::size_t p = 0; p < arch.param_count(); ++p) {
    const std::size_t fan_in = arch.weight_count(p) / arch.bias_count(p);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    RngStream rng(seed, 0, p, StreamTag::init_weights);
    for (auto& w : params[p].values()) w = rng.uniform(-bound, bound);
  }
  return params;
}

Masks full_masks(const NetworkArch& arch, std::uint8_t value) {
  Masks masks;
  masks.reserve(arch.param_count());
  for (std::size_t p = 0; p < arch.param_count(); ++p)
    masks.emplace_back(arch.weight_count(p), value);
  return masks;
}

void check_params(const NetworkArch& arch, const Params& params, const Masks* masks) {
  require(params.size() == arch.param_count(), ErrorCode::shape_mismatch,
          "parameter layer count does not match the architecture");
  for (std::size_t p = 0; p < params.size(); ++p) {
    const bool conv_weights = std::holds_alternative<Tensor4>(params[p].weights);
    require(conv_weights == arch.is_conv(p), ErrorCode::shape_mismatch,
            "layer " + std::to_string(p) + " weight kind does not match the architecture");
    if (conv_weights) {
      const auto& c = arch.conv(p);
      require(std::get<Tensor4>(params[p].weights).shape() ==
                  Shape4{c.filters, c.channels, c.kernel, c.kernel},
              ErrorCode::shape_mismatch, "conv weight shape mismatch at layer " + std::to_string(p));
    } else {
      const auto& f = arch.fc(p);
      const auto& t = std::get<Tensor2>(params[p].weights);
      require(t.outputs() == f.outputs && t.inputs() == f.inputs, ErrorCode::shape_mismatch,
              "fc weight shape mismatch at layer " + std::to_string(p));
    }
    require(params[p].bias.size() == arch.bias_count(p), ErrorCode::shape_mismatch,
            "bias length mismatch at layer " + std::to_string(p));
  }
  if (masks != nullptr) {
    require(masks->size() == params.size(), ErrorCode::shape_mismatch,
            "mask layer count does not match parameters");
    for (std::size_t p = 0; p < params.size(); ++p)
      require((*masks)[p].size() == arch.weight_count(p), ErrorCode::shape_mismatch,
              "mask shape mismatch at layer " + std::to_string(p));
  }
}

void TrainConfig::validate() const {
  require(batch_size >= 1, ErrorCode::config, "batch size must be at least 1");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::config,
          "learning rate must be positive");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::config,
          "momentum must lie in [0, 1)");
  require(lr_decay > 0.0 && lr_decay <= 1.0, ErrorCode::config,
          "lr decay factor must lie in (0, 1]");
  require(decay_at >= 0.0 && decay_at <= 1.0, ErrorCode::config,
          "decay point must lie in [0, 1]");
}

double TrainConfig::rate_for_epoch(std::size_t epoch) const {
  const bool decayed = static_cast<double>(epoch) >= decay_at * static_cast<double>(epochs);
  return decayed ? learning_rate * lr_decay : learning_rate;
}

Tensor4 conv2d_forward(const Tensor4& input, const Tensor4& weights,
                       std::span<const double> bias, std::size_t stride) {
  const auto& in = input.shape();
  const auto& w = weights.shape();
  require(in.c == w.c, ErrorCode::shape_mismatch, "input channels do not match kernel channels");
  require(w.h == w.w, ErrorCode::shape_mismatch, "only square kernels are supported");
  require(bias.size() == w.n, ErrorCode::shape_mismatch, "bias length does not match filters");
  require(stride > 0 && in.h >= w.h && in.w >= w.w && (in.h - w.h) % stride == 0 &&
              (in.w - w.w) % stride == 0,
          ErrorCode::shape_mismatch, "spatial size does not admit the stride");

  const ConvGeometry g{in.c, in.h, in.w, w.h, stride, conv_output_size(in.h, w.h, stride),
                       conv_output_size(in.w, w.w, stride)};
  ConvKernel kernel(g, w.n, nullptr);
  Tensor4 out({in.n, w.n, g.out_h, g.out_w});
  for (std::size_t s = 0; s < in.n; ++s) {
    kernel.forward(weights.data().data(), bias.data(), input.data().data() + s * in.c * in.h * in.w,
                   out.data().data() + s * w.n * g.positions());
  }
  return out;
}

PoolResult maxpool_forward(const Tensor4& input, std::size_t window, std::size_t stride) {
  const auto& in = input.shape();
  require(window > 0 && stride > 0 && in.h >= window && in.w >= window &&
              (in.h - window) % stride == 0 && (in.w - window) % stride == 0,
          ErrorCode::shape_mismatch, "pooling window does not tile the input");
  const std::size_t oh = conv_output_size(in.h, window, stride);
  const std::size_t ow = conv_output_size(in.w, window, stride);
  PoolResult result{Tensor4({in.n, in.c, oh, ow}), std::vector<std::size_t>(in.n * in.c * oh * ow)};
  const ActShape sample{in.c, in.h, in.w};
  const std::size_t in_stride = sample.size();
  const std::size_t out_stride = in.c * oh * ow;
  for (std::size_t s = 0; s < in.n; ++s) {
    pool_forward_sample(sample, PoolSpec{window, stride}, oh, ow,
                        input.data().data() + s * in_stride,
                        result.output.data().data() + s * out_stride,
                        result.argmax.data() + s * out_stride);
    for (std::size_t j = 0; j < out_stride; ++j) result.argmax[s * out_stride + j] += s * in_stride;
  }
  return result;
}

std::vector<double> fc_forward(std::span<const double> input, const Tensor2& weights,
                               std::span<const double> bias) {
  require(input.size() == weights.inputs(), ErrorCode::shape_mismatch,
          "input length does not match fc inputs");
  require(bias.size() == weights.outputs(), ErrorCode::shape_mismatch,
          "bias length does not match fc outputs");
  const auto plan = RowPlan::build(weights.outputs(), weights.inputs(), nullptr);
  std::vector<double> out(weights.outputs());
  fc_forward_sample(plan, weights.inputs(), weights.data().data(), bias.data(), input.data(),
                    out.data());
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double top = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (auto& v : p) {
    v = std::exp(v - top);
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

LossAndGrads loss_and_backward(const NetworkArch& arch, const Params& params,
                               const Batch& batch, const Masks* masks) {
  check_params(arch, params, masks);
  const auto& in = batch.inputs.shape();
  require(!batch.labels.empty() && in.n == batch.labels.size(), ErrorCode::invalid_argument,
          "batch must be nonempty with one label per sample");
  const auto& input = arch.input();
  require(in.c == input.channels && in.h == input.height && in.w == input.width,
          ErrorCode::shape_mismatch, "batch inputs do not match the network input shape");
  for (int label : batch.labels)
    require(label >= 0 && label < static_cast<int>(NetworkArch::num_classes),
            ErrorCode::invalid_argument, "label out of range 0..9");

  LossAndGrads result{0.0, zero_params(arch)};
  Engine engine(arch, params, masks);
  const std::size_t stride = input.size();
  for (std::size_t s = 0; s < in.n; ++s) {
    engine.forward(batch.inputs.data().subspan(s * stride, stride));
    result.loss += engine.backward(batch.labels[s], result.grads);
  }
  const double scale = 1.0 / static_cast<double>(in.n);
  result.loss *= scale;
  for (auto& lp : result.grads) {
    for (auto& g : lp.values()) g *= scale;
    for (auto& g : lp.bias) g *= scale;
  }
  return result;
}

std::vector<double> forward_logits(const NetworkArch& arch, const Params& params,
                                   const Masks& masks, std::span<const double> image) {
  check_params(arch, params, &masks);
  require(image.size() == arch.input().size(), ErrorCode::shape_mismatch,
          "image size does not match the network input");
  Engine engine(arch, params, &masks);
  const auto logits = engine.forward(image);
  return {logits.begin(), logits.end()};
}

Params train_masked(const NetworkArch& arch, Params params, const Masks& masks,
                    const Dataset& data, const TrainConfig& cfg, const TrainObserver& observer) {
  cfg.validate();
  check_params(arch, params, &masks);
  require(!data.empty(), ErrorCode::invalid_argument, "cannot train on an empty dataset");
  require(data.image_size() == arch.input().size(), ErrorCode::shape_mismatch,
          "dataset images do not match the network input");

  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params[p].values();
    for (std::size_t j = 0; j < w.size(); ++j)
      if (!masks[p][j]) w[j] = 0.0;
  }

  Params grads = zero_params(arch);
  Params velocity = zero_params(arch);
  Engine engine(arch, params, &masks);
  std::vector<double> image(arch.input().size());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t per_epoch =
      cfg.samples_per_epoch == 0 ? data.size() : std::min(cfg.samples_per_epoch, data.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream rng(cfg.seed, epoch, 0, StreamTag::shuffle);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const double rate = cfg.rate_for_epoch(epoch);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < per_epoch; start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, per_epoch);
      zero(grads);
      for (std::size_t s = start; s < end; ++s) {
        data.copy_image(order[s], image);
        engine.forward(image);
        epoch_loss += engine.backward(data.label(order[s]), grads);
      }
      const double step = rate / static_cast<double>(end - start);
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto w = params[p].values();
        auto v = velocity[p].values();
        const auto g = grads[p].values();
        const auto& m = masks[p];
        for (std::size_t j = 0; j < w.size(); ++j) {
          if (m[j]) {
            v[j] = cfg.momentum * v[j] - step * g[j];
            w[j] += v[j];
          } else {
            w[j] = 0.0;
          }
        }
        auto& b = params[p].bias;
        auto& vb = velocity[p].bias;
        for (std::size_t j = 0; j < b.size(); ++j) {
          vb[j] = cfg.momentum * vb[j] - step * grads[p].bias[j];
          b[j] += vb[j];
        }
      }
    }
    if (observer) observer(epoch, epoch_loss / static_cast<double>(per_epoch));
  }
  return params;
}

double mean_loss(const NetworkArch& arch, const Params& params, const Masks& masks,
                 const Dataset& data) {
  check_params(arch, params, &masks);
  require(!data.empty(), ErrorCode::invalid_argument, "empty dataset");
  Engine engine(arch, params, &masks);
  std::vector<double> image(arch.input().size());
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    data.copy_image(i, image);
    const auto probs = softmax(engine.forward(image));
    total -= std::log(std::max(probs[static_cast<std::size_t>(data.label(i))], 1e-300));
  }
  return total / static_cast<double>(data.size());
}

double predict_error(const NetworkArch& arch, const Params& params, const Masks& masks,
                     const Dataset& data) {
  check_params(arch, params, &masks);
  require(!data.empty(), ErrorCode::invalid_argument, "cannot measure error on an empty dataset");
  require(data.image_size() == arch.input().size(), ErrorCode::shape_mismatch,
          "dataset images do not match the network input");
  Engine engine(arch, params, &masks);
  std::vector<double> image(arch.input().size());
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    data.copy_image(i, image);
    if (first_argmax(engine.forward(image)) != static_cast<std::size_t>(data.label(i))) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

}  // namespace evoprune
