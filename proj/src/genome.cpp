#include "genome.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

namespace evoprune {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::size_t filter_patch(const ConvSpec& c) { return c.channels * c.kernel * c.kernel; }

// Zeroes the mask entries of `next` that read channel `channel` of the
// previous conv layer's output.
void mask_consumers(const NetworkArch& arch, std::size_t next, std::size_t channel,
                    Mask& mask) {
  if (arch.is_conv(next)) {
    const auto& c = arch.conv(next);
    const std::size_t kk = c.kernel * c.kernel;
    for (std::size_t f = 0; f < c.filters; ++f) {
      auto* base = mask.data() + (f * c.channels + channel) * kk;
      std::fill(base, base + kk, std::uint8_t{0});
    }
  } else {
    const auto& fc = arch.fc(next);
    const auto& in = arch.param_input(next);
    const std::size_t spatial = in.height * in.width;
    for (std::size_t o = 0; o < fc.outputs; ++o) {
      auto* base = mask.data() + o * fc.inputs + channel * spatial;
      std::fill(base, base + spatial, std::uint8_t{0});
    }
  }
}

bool consumers_dead(const NetworkArch& arch, std::size_t next, std::size_t channel,
                    const Mask& mask) {
  auto zero = [](const std::uint8_t* b, std::size_t n) {
    return std::all_of(b, b + n, [](std::uint8_t v) { return v == 0; });
  };
  if (arch.is_conv(next)) {
    const auto& c = arch.conv(next);
    const std::size_t kk = c.kernel * c.kernel;
    for (std::size_t f = 0; f < c.filters; ++f)
      if (!zero(mask.data() + (f * c.channels + channel) * kk, kk)) return false;
    return true;
  }
  const auto& fc = arch.fc(next);
  const std::size_t spatial = arch.param_input(next).height * arch.param_input(next).width;
  for (std::size_t o = 0; o < fc.outputs; ++o)
    if (!zero(mask.data() + o * fc.inputs + channel * spatial, spatial)) return false;
  return true;
}

// Little-endian byte sink / source for checkpoints.
class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void raw(const char* s, std::size_t n) { bytes_.insert(bytes_.end(), s, s + n); }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  void need(std::size_t n) const {
    require(remaining() >= n, ErrorCode::corrupt_length, "checkpoint is truncated");
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_++]} << (8 * i);
    return std::bit_cast<double>(v);
  }
  bool starts_with(const char* s, std::size_t n) {
    if (remaining() < n || std::memcmp(bytes_.data() + pos_, s, n) != 0) return false;
    pos_ += n;
    return true;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[8] = {'E', 'V', 'O', 'P', 'R', 'U', 'N', 'E'};

enum LayerKind : std::uint32_t { kConv = 0, kRelu = 1, kPool = 2, kFc = 3 };

}  // namespace

Genome::Genome(NetworkArch arch, Params params, Masks masks)
    : arch_(std::move(arch)), params_(std::move(params)), masks_(std::move(masks)) {
  check_params(arch_, params_, &masks_);
  for (const auto& m : masks_)
    for (auto v : m)
      require(v <= 1, ErrorCode::invalid_argument, "mask entries must be 0 or 1");
}

Genome Genome::dense(NetworkArch arch, Params params) {
  auto masks = full_masks(arch);
  return Genome(std::move(arch), std::move(params), std::move(masks));
}

void Genome::replace_params(Params params) {
  check_params(arch_, params, &masks_);
  params_ = std::move(params);
  cache_.reset();
}

void Genome::copy_gene(std::size_t layer, const Genome& donor) {
  require(donor.arch_ == arch_, ErrorCode::shape_mismatch,
          "cannot exchange genes between different architectures");
  params_[layer] = donor.params_[layer];
  masks_[layer] = donor.masks_[layer];
  cache_.reset();
}

std::vector<std::uint8_t> Genome::alive_filters(std::size_t layer) const {
  const auto& c = arch_.conv(layer);
  const std::size_t patch = filter_patch(c);
  std::vector<std::uint8_t> alive(c.filters, 0);
  const auto& m = masks_[layer];
  for (std::size_t f = 0; f < c.filters; ++f)
    alive[f] = std::any_of(m.begin() + static_cast<std::ptrdiff_t>(f * patch),
                           m.begin() + static_cast<std::ptrdiff_t>((f + 1) * patch),
                           [](std::uint8_t v) { return v != 0; });
  return alive;
}

bool Genome::is_dense() const {
  return std::all_of(masks_.begin(), masks_.end(), [](const Mask& m) {
    return std::all_of(m.begin(), m.end(), [](std::uint8_t v) { return v == 1; });
  });
}

Genome mutate(const Genome& genome, double conv_rate, double fc_rate, RngStream& rng) {
  require(conv_rate >= 0.0 && conv_rate <= 1.0 && fc_rate >= 0.0 && fc_rate <= 1.0,
          ErrorCode::invalid_argument, "mutation rates must lie in [0, 1]");
  Genome out = genome;
  bool changed = false;
  auto& masks = out.mutable_masks();
  const auto& arch = genome.arch();
  for (std::size_t p = 0; p < arch.param_count(); ++p) {
    auto& mask = masks[p];
    if (arch.is_conv(p)) {
      const std::size_t patch = filter_patch(arch.conv(p));
      const auto alive = genome.alive_filters(p);
      for (std::size_t f = 0; f < alive.size(); ++f) {
        if (alive[f] && rng.bernoulli(conv_rate)) {
          std::fill(mask.begin() + static_cast<std::ptrdiff_t>(f * patch),
                    mask.begin() + static_cast<std::ptrdiff_t>((f + 1) * patch), std::uint8_t{0});
          changed = true;
        }
      }
    } else {
      for (auto& m : mask) {
        if (m && rng.bernoulli(fc_rate)) {
          m = 0;
          changed = true;
        }
      }
    }
  }
  // An unchanged genome keeps its cached metrics.
  return apply_masks(propagate_masks(changed ? std::move(out) : genome));
}

Genome propagate_masks(Genome genome) {
  const auto& arch = genome.arch();
  for (std::size_t p = 0; p + 1 < arch.param_count(); ++p) {
    if (!arch.is_conv(p)) continue;
    const auto alive = genome.alive_filters(p);
    if (std::all_of(alive.begin(), alive.end(), [](std::uint8_t v) { return v != 0; })) continue;
    for (std::size_t f = 0; f < alive.size(); ++f) {
      // mutable_masks() drops the cache, so touch it only when needed.
      if (alive[f] || consumers_dead(arch, p + 1, f, genome.masks()[p + 1])) continue;
      mask_consumers(arch, p + 1, f, genome.mutable_masks()[p + 1]);
    }
  }
  return genome;
}

Genome apply_masks(Genome genome) {
  bool dirty = false;
  for (std::size_t p = 0; p < genome.layer_count(); ++p) {
    const auto w = genome.params()[p].values();
    const auto& m = genome.masks()[p];
    for (std::size_t j = 0; j < w.size(); ++j)
      if (!m[j] && (w[j] != 0.0 || std::signbit(w[j]))) dirty = true;
  }
  if (!dirty) return genome;
  auto& params = genome.mutable_params();
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params[p].values();
    const auto& m = genome.masks()[p];
    for (std::size_t j = 0; j < w.size(); ++j)
      if (!m[j]) w[j] = 0.0;
  }
  return genome;
}

void check_mask_consistency(const Genome& genome) {
  const auto& arch = genome.arch();
  for (std::size_t p = 0; p < arch.param_count(); ++p) {
    if (!arch.is_conv(p)) continue;
    const auto& c = arch.conv(p);
    const auto& mask = genome.masks()[p];
    const std::size_t kk = c.kernel * c.kernel;
    const auto filters = genome.alive_filters(p);
    std::vector<std::uint8_t> channels(c.channels, 0);
    for (std::size_t f = 0; f < c.filters; ++f)
      for (std::size_t ch = 0; ch < c.channels; ++ch)
        for (std::size_t j = 0; j < kk; ++j)
          if (mask[(f * c.channels + ch) * kk + j]) channels[ch] = 1;
    for (std::size_t f = 0; f < c.filters; ++f)
      for (std::size_t ch = 0; ch < c.channels; ++ch)
        for (std::size_t j = 0; j < kk; ++j)
          require(mask[(f * c.channels + ch) * kk + j] == (filters[f] && channels[ch]),
                  ErrorCode::inconsistent_masks,
                  "conv layer " + std::to_string(p) + " mask is not filter/channel granular");
    if (p + 1 < arch.param_count()) {
      for (std::size_t f = 0; f < c.filters; ++f)
        require(filters[f] || consumers_dead(arch, p + 1, f, genome.masks()[p + 1]),
                ErrorCode::inconsistent_masks,
                "layer " + std::to_string(p + 1) + " still reads dead filter " +
                    std::to_string(f) + " of layer " + std::to_string(p));
    }
  }
}

bool masks_consistent(const Genome& genome) {
  try {
    check_mask_consistency(genome);
    return true;
  } catch (const Error&) {
    return false;
  }
}

void save_checkpoint(const Genome& genome, const std::filesystem::path& path) {
  const auto& arch = genome.arch();
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(checkpoint_version);
  w.u32(static_cast<std::uint32_t>(arch.input().channels));
  w.u32(static_cast<std::uint32_t>(arch.input().height));
  w.u32(static_cast<std::uint32_t>(arch.input().width));
  w.u32(static_cast<std::uint32_t>(arch.layers().size()));
  for (const auto& layer : arch.layers()) {
    std::array<std::uint32_t, 5> fields{};
    std::visit(overloaded{
                   [&](const ConvSpec& c) {
                     fields = {kConv, static_cast<std::uint32_t>(c.filters),
                               static_cast<std::uint32_t>(c.channels),
                               static_cast<std::uint32_t>(c.kernel),
                               static_cast<std::uint32_t>(c.stride)};
                   },
                   [&](const ReluSpec&) { fields = {kRelu, 0, 0, 0, 0}; },
                   [&](const PoolSpec& p) {
                     fields = {kPool, static_cast<std::uint32_t>(p.window),
                               static_cast<std::uint32_t>(p.stride), 0, 0};
                   },
                   [&](const FcSpec& f) {
                     fields = {kFc, static_cast<std::uint32_t>(f.outputs),
                               static_cast<std::uint32_t>(f.inputs), 0, 0};
                   },
               },
               layer);
    for (auto v : fields) w.u32(v);
  }
  for (std::size_t p = 0; p < genome.layer_count(); ++p) {
    for (double v : genome.params()[p].values()) w.f64(v);
    for (auto m : genome.masks()[p]) w.u8(m);
    for (double b : genome.params()[p].bias) w.f64(b);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(w.bytes().data()),
            static_cast<std::streamsize>(w.bytes().size()));
  if (!out) fail(ErrorCode::io, "failed writing checkpoint " + path.string());
}

Genome load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(ErrorCode::io, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(in.tellg()));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) fail(ErrorCode::io, "cannot read checkpoint " + path.string());

  Reader r(std::move(bytes));
  require(r.starts_with(kMagic, sizeof kMagic), ErrorCode::bad_magic,
          path.string() + " is not an EVOPRUNE checkpoint");
  const auto version = r.u32();
  require(version == checkpoint_version, ErrorCode::version_mismatch,
          "checkpoint version " + std::to_string(version) + " is not supported (expected " +
              std::to_string(checkpoint_version) + ")");

  ActShape input;
  input.channels = r.u32();
  input.height = r.u32();
  input.width = r.u32();
  const std::size_t layer_count = r.u32();
  r.need(layer_count * 20);
  std::vector<LayerSpec> layers;
  layers.reserve(layer_count);
  for (std::size_t i = 0; i < layer_count; ++i) {
    std::array<std::uint32_t, 5> f{};
    for (auto& v : f) v = r.u32();
    switch (f[0]) {
      case kConv: layers.emplace_back(ConvSpec{f[1], f[2], f[3], f[4]}); break;
      case kRelu: layers.emplace_back(ReluSpec{}); break;
      case kPool: layers.emplace_back(PoolSpec{f[1], f[2]}); break;
      case kFc: layers.emplace_back(FcSpec{f[1], f[2]}); break;
      default: fail(ErrorCode::parse, "unknown layer kind " + std::to_string(f[0]));
    }
  }
  NetworkArch arch = [&] {
    try {
      return NetworkArch(input, std::move(layers));
    } catch (const Error& e) {
      fail(ErrorCode::parse, std::string("checkpoint architecture is invalid: ") + e.what());
    }
  }();

  std::size_t payload = 0;
  for (std::size_t p = 0; p < arch.param_count(); ++p)
    payload += arch.weight_count(p) * 9 + arch.bias_count(p) * 8;
  require(r.remaining() == payload, ErrorCode::corrupt_length,
          "checkpoint payload is " + std::to_string(r.remaining()) + " bytes, expected " +
              std::to_string(payload));

  Params params = zero_params(arch);
  Masks masks = full_masks(arch);
  for (std::size_t p = 0; p < arch.param_count(); ++p) {
    for (double& v : params[p].values()) v = r.f64();
    for (auto& m : masks[p]) {
      m = r.u8();
      require(m <= 1, ErrorCode::parse, "checkpoint mask entry is not 0 or 1");
    }
    for (double& b : params[p].bias) b = r.f64();
  }
  return Genome(std::move(arch), std::move(params), std::move(masks));
}

}  // namespace evoprune
