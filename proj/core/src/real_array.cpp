#include "trimsgd/real_array.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "trimsgd/error.hpp"

namespace trimsgd {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_extents(const Shape& shape) {
  if (shape.empty()) throw DimensionError("array shape must have at least one extent");
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("array extents must be positive, got " + shape_string(shape));
  }
}

}  // namespace

RealArray::RealArray(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  values_.assign(element_count(shape_), fill);
}

RealArray::RealArray(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_extents(shape_);
  if (values_.size() != element_count(shape_)) {
    throw DimensionError("shape " + shape_string(shape_) + " needs " +
                         std::to_string(element_count(shape_)) + " values, got " +
                         std::to_string(values_.size()));
  }
}

RealArray RealArray::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t k = n ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(n * k);
  for (const auto& row : rows) {
    if (row.size() != k) throw DimensionError("ragged rows in RealArray::from_rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return RealArray({n, k}, std::move(values));
}

RealArray RealArray::from_list(std::initializer_list<double> values) {
  return RealArray({values.size()}, std::vector<double>(values));
}

RealArray RealArray::reshaped(Shape shape) const {
  if (element_count(shape) != size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return RealArray(std::move(shape), values_);
}

bool RealArray::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace trimsgd
