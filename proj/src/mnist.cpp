#include "mnist.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "error.hpp"
#include "rng.hpp"

namespace evoprune {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint64_t next_dataset_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(in.tellg()));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) fail(ErrorCode::io, "cannot read " + path.string());
  return bytes;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string hex(std::uint32_t value) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", value);
  return buf;
}

}  // namespace

Dataset::Dataset(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> pixels,
                 std::vector<std::uint8_t> labels)
    : rows_(rows),
      cols_(cols),
      pixels_(std::move(pixels)),
      labels_(std::move(labels)),
      id_(next_dataset_id()) {
  require(pixels_.size() == labels_.size() * rows_ * cols_, ErrorCode::count_mismatch,
          "image count does not match label count");
  for (auto l : labels_)
    require(l < 10, ErrorCode::invalid_argument, "label out of range 0..9");
}

void Dataset::copy_image(std::size_t i, std::span<double> out) const {
  const auto raw = raw_image(i);
  std::transform(raw.begin(), raw.end(), out.begin(),
                 [](std::uint8_t b) { return b / 255.0; });
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> labels;
  pixels.reserve(indices.size() * image_size());
  labels.reserve(indices.size());
  for (auto i : indices) {
    require(i < size(), ErrorCode::invalid_argument, "subset index out of range");
    const auto raw = raw_image(i);
    pixels.insert(pixels.end(), raw.begin(), raw.end());
    labels.push_back(labels_[i]);
  }
  return Dataset(rows_, cols_, std::move(pixels), std::move(labels));
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);

  require(images.size() >= 16, ErrorCode::truncated,
          "image file header truncated: " + images_path.string());
  require(labels.size() >= 8, ErrorCode::truncated,
          "label file header truncated: " + labels_path.string());

  const auto image_magic = read_be32(images, 0);
  require(image_magic == kImageMagic, ErrorCode::bad_magic,
          "bad image file magic " + hex(image_magic) + " (expected 0x00000803) in " +
              images_path.string());
  const auto label_magic = read_be32(labels, 0);
  require(label_magic == kLabelMagic, ErrorCode::bad_magic,
          "bad label file magic " + hex(label_magic) + " (expected 0x00000801) in " +
              labels_path.string());

  const std::size_t count = read_be32(images, 4);
  const std::size_t rows = read_be32(images, 8);
  const std::size_t cols = read_be32(images, 12);
  const std::size_t label_count = read_be32(labels, 4);

  require(images.size() - 16 >= count * rows * cols, ErrorCode::truncated,
          "image file truncated: header declares " + std::to_string(count) + " images");
  require(labels.size() - 8 >= label_count, ErrorCode::truncated,
          "label file truncated: header declares " + std::to_string(label_count) + " labels");
  require(count == label_count, ErrorCode::count_mismatch,
          std::to_string(count) + " images but " + std::to_string(label_count) + " labels");

  std::vector<std::uint8_t> pixels(images.begin() + 16,
                                   images.begin() + 16 + static_cast<std::ptrdiff_t>(count * rows * cols));
  std::vector<std::uint8_t> label_bytes(labels.begin() + 8,
                                        labels.begin() + 8 + static_cast<std::ptrdiff_t>(count));
  for (std::size_t i = 0; i < count; ++i)
    require(label_bytes[i] < 10, ErrorCode::parse,
            "label " + std::to_string(label_bytes[i]) + " out of range at index " +
                std::to_string(i));
  return Dataset(rows, cols, std::move(pixels), std::move(label_bytes));
}

Split split(const Dataset& train, const SplitSpec& spec) {
  require(spec.validation_size < train.size(), ErrorCode::invalid_argument,
          "validation size must be smaller than the dataset");

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng(spec.seed, 0, 0, StreamTag::split);
  // Partial Fisher-Yates: the first validation_size slots are the sample.
  for (std::size_t i = 0; i < spec.validation_size; ++i) {
    const auto j = i + rng.below(order.size() - i);
    std::swap(order[i], order[j]);
  }
  std::vector<std::size_t> validation(order.begin(),
                                      order.begin() + static_cast<std::ptrdiff_t>(spec.validation_size));
  std::vector<std::size_t> fit(order.begin() + static_cast<std::ptrdiff_t>(spec.validation_size),
                               order.end());
  std::sort(validation.begin(), validation.end());
  std::sort(fit.begin(), fit.end());
  return {train.subset(fit), train.subset(validation)};
}

}  // namespace evoprune
