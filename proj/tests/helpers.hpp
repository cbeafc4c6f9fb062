#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "arch.hpp"
#include "genome.hpp"
#include "mnist.hpp"
#include "nn.hpp"

namespace testing {

using namespace evoprune;

// 1x8x8 input, 2 conv filters, an 8-unit hidden FC layer.
inline NetworkArch tiny_arch() {
  return NetworkArch({1, 8, 8}, {ConvSpec{2, 1, 3, 1}, ReluSpec{}, PoolSpec{2, 2},
                                 FcSpec{8, 18}, ReluSpec{}, FcSpec{10, 8}});
}

// Two conv layers so conv->conv and conv->fc propagation both occur.
inline NetworkArch two_conv_arch(std::size_t f1 = 3, std::size_t f2 = 4, std::size_t hidden = 6) {
  return NetworkArch({1, 10, 10}, {ConvSpec{f1, 1, 3, 1}, ReluSpec{}, PoolSpec{2, 2},
                                   ConvSpec{f2, f1, 3, 1}, ReluSpec{}, FcSpec{hidden, f2 * 4},
                                   ReluSpec{}, FcSpec{10, hidden}});
}

inline Genome random_genome(const NetworkArch& arch, std::uint64_t seed) {
  return Genome::dense(arch, init_params(arch, seed));
}

// Images of `side` x `side` with a bright 2x2 blob whose position encodes
// the label, plus noise. Learnable by the tiny nets.
inline Dataset blob_dataset(std::size_t count, std::size_t side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> pixels(count * side * side);
  std::vector<std::uint8_t> labels(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto label = static_cast<std::uint8_t>(i % 10);
    labels[i] = label;
    auto* img = pixels.data() + i * side * side;
    for (std::size_t p = 0; p < side * side; ++p) img[p] = static_cast<std::uint8_t>(rng() % 40);
    const std::size_t r = (label % 5) * (side - 2) / 4;
    const std::size_t c = (label / 5) * (side - 2);
    for (std::size_t dr = 0; dr < 2; ++dr)
      for (std::size_t dc = 0; dc < 2; ++dc) img[(r + dr) * side + c + dc] = 255;
  }
  return Dataset(side, side, std::move(pixels), std::move(labels));
}

// Samples [first, first + count) as one batch.
inline Batch make_batch(const Dataset& data, std::size_t first, std::size_t count) {
  Batch b{Tensor4({count, 1, data.rows(), data.cols()}), {}};
  for (std::size_t i = 0; i < count; ++i) {
    data.copy_image(first + i, b.inputs.data().subspan(i * data.image_size(), data.image_size()));
    b.labels.push_back(data.label(first + i));
  }
  return b;
}

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::vector<std::uint8_t> idx_images(std::uint32_t count, std::uint32_t rows,
                                            std::uint32_t cols,
                                            const std::vector<std::uint8_t>& pixels,
                                            std::uint32_t magic = 2051) {
  std::vector<std::uint8_t> out;
  put_be32(out, magic);
  put_be32(out, count);
  put_be32(out, rows);
  put_be32(out, cols);
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

inline std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels,
                                            std::uint32_t magic = 2049) {
  std::vector<std::uint8_t> out;
  put_be32(out, magic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("evoprune_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
