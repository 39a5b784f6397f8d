#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace trimsgd {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles with an explicit shape.
///
/// The flat buffer always holds exactly `element_count(shape())` values.
/// Extents must be positive.
class RealArray {
 public:
  RealArray() = default;
  explicit RealArray(Shape shape, double fill = 0.0);
  RealArray(Shape shape, std::vector<double> values);

  static RealArray from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static RealArray from_list(std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  // Row-major element access for rank-2 arrays.
  double& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

  // Row-major element access for rank-4 arrays.
  double& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return values_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  double at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return values_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  /// Same values under a new shape with the same element count.
  RealArray reshaped(Shape shape) const;

  bool all_finite() const noexcept;

  friend bool operator==(const RealArray&, const RealArray&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

}  // namespace trimsgd
