#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace evoprune {

// Labelled grayscale images. Pixels are kept as the raw bytes of the IDX
// file and exposed scaled to [0, 1] (byte / 255).
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> pixels,
          std::vector<std::uint8_t> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t image_size() const noexcept { return rows_ * cols_; }

  int label(std::size_t i) const { return labels_[i]; }
  std::span<const std::uint8_t> raw_image(std::size_t i) const {
    return {pixels_.data() + i * image_size(), image_size()};
  }
  double pixel(std::size_t i, std::size_t p) const {
    return pixels_[i * image_size() + p] / 255.0;
  }
  void copy_image(std::size_t i, std::span<double> out) const;

  Dataset subset(std::span<const std::size_t> indices) const;

  // Distinguishes dataset contents for metric caching; copies share it.
  std::uint64_t id() const noexcept { return id_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> pixels_;
  std::vector<std::uint8_t> labels_;
  std::uint64_t id_ = 0;
};

// Reads an IDX image file (magic 2051) and label file (magic 2049).
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

struct SplitSpec {
  std::size_t validation_size = 1000;
  std::uint64_t seed = 0;
};

struct Split {
  Dataset fit;
  Dataset validation;
};

// Disjoint, exhaustive, seed-deterministic partition. Both halves keep the
// original relative order of their samples.
Split split(const Dataset& train, const SplitSpec& spec);

}  // namespace evoprune
