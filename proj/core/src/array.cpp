#include "metaleap/array.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "metaleap/error.hpp"

namespace metaleap {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Array::Array(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("array shape " + shape_to_string(shape_) + " holds " +
                     std::to_string(shape_size(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
}

Array Array::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Array(Shape{n}, std::move(values));
}

Array Array::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Array(Shape{rows, cols}, std::move(values));
}

Array Array::identity(std::size_t n) {
  Array out(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) out.at(i, i) = 1.0;
  return out;
}

std::size_t Array::rows() const noexcept {
  return shape_.size() == 2 ? shape_[0] : 1;
}

std::size_t Array::cols() const noexcept {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  return 1;
}

double Array::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on array of shape " + shape_to_string(shape_));
  }
  return data_[0];
}

bool Array::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Array Array::reshaped(Shape shape) const {
  return Array(std::move(shape), data_);
}

}  // namespace metaleap
