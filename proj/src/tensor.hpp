#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "error.hpp"

namespace evoprune {

struct Shape4 {
  std::size_t n = 0;  // filters, or samples for activations
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t size() const noexcept { return n * c * h * w; }
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

// Dense 4D tensor, row-major over (n, c, h, w).
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, double fill = 0.0)
      : shape_(shape), data_(shape.size(), fill) {}
  Tensor4(Shape4 shape, std::vector<double> data)
      : shape_(shape), data_(std::move(data)) {
    require(data_.size() == shape_.size(), ErrorCode::shape_mismatch,
            "tensor data length does not match its shape");
  }

  const Shape4& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  Shape4 shape_;
  std::vector<double> data_;
};

// Dense matrix of shape (outputs, inputs), row-major.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t outputs, std::size_t inputs, double fill = 0.0)
      : outputs_(outputs), inputs_(inputs), data_(outputs * inputs, fill) {}
  Tensor2(std::size_t outputs, std::size_t inputs, std::vector<double> data)
      : outputs_(outputs), inputs_(inputs), data_(std::move(data)) {
    require(data_.size() == outputs_ * inputs_, ErrorCode::shape_mismatch,
            "matrix data length does not match its shape");
  }

  std::size_t outputs() const noexcept { return outputs_; }
  std::size_t inputs() const noexcept { return inputs_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& at(std::size_t o, std::size_t i) { return data_[o * inputs_ + i]; }
  double at(std::size_t o, std::size_t i) const { return data_[o * inputs_ + i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t outputs_ = 0;
  std::size_t inputs_ = 0;
  std::vector<double> data_;
};

}  // namespace evoprune
