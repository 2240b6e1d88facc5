#include "metaleap/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "metaleap/error.hpp"

namespace metaleap {

namespace {

void require_same_layout(const ParameterVector& a, const ParameterVector& b, const char* op) {
  if (!a.same_layout(b)) {
    throw ShapeError(std::string(op) + ": parameter layouts differ");
  }
}

template <typename F>
ParameterVector zip(const ParameterVector& a, const ParameterVector& b, const char* op, F f) {
  require_same_layout(a, b, op);
  ParameterVector out;
  for (std::size_t i = 0; i < a.num_segments(); ++i) {
    out.add(a.names()[i], f(a.var(i), b.var(i)));
  }
  return out;
}

}  // namespace

void ParameterVector::add(std::string name, Var value) {
  if (contains(name)) throw ValidationError("duplicate parameter segment '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

std::size_t ParameterVector::total_dim() const noexcept {
  std::size_t n = 0;
  for (const Var& v : values_) n += v.size();
  return n;
}

const Var& ParameterVector::operator[](std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return values_[i];
  }
  throw ValidationError("no parameter segment named '" + std::string(name) + "'");
}

bool ParameterVector::contains(std::string_view name) const noexcept {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

ParameterVector ParameterVector::as_leaves() const {
  ParameterVector out;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    out.add(names_[i], Var::leaf(values_[i].value(), true));
  }
  return out;
}

ParameterVector ParameterVector::detached() const {
  ParameterVector out;
  for (std::size_t i = 0; i < values_.size(); ++i) out.add(names_[i], values_[i].detach());
  return out;
}

std::vector<double> ParameterVector::flatten() const {
  std::vector<double> flat;
  flat.reserve(total_dim());
  for (const Var& v : values_) {
    const auto data = v.value().data();
    flat.insert(flat.end(), data.begin(), data.end());
  }
  return flat;
}

ParameterVector ParameterVector::unflatten(const ParameterVector& layout,
                                           std::span<const double> flat) {
  if (flat.size() != layout.total_dim()) {
    throw ShapeError("unflatten: expected " + std::to_string(layout.total_dim()) +
                     " values, got " + std::to_string(flat.size()));
  }
  ParameterVector out;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < layout.num_segments(); ++i) {
    const Shape& shape = layout.var(i).shape();
    const std::size_t n = shape_size(shape);
    std::vector<double> values(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                               flat.begin() + static_cast<std::ptrdiff_t>(offset + n));
    out.add(layout.names()[i], Array(shape, std::move(values)));
    offset += n;
  }
  return out;
}

ParameterVector ParameterVector::zeros_like(const ParameterVector& layout) {
  ParameterVector out;
  for (std::size_t i = 0; i < layout.num_segments(); ++i) {
    out.add(layout.names()[i], Array(layout.var(i).shape(), 0.0));
  }
  return out;
}

bool ParameterVector::same_layout(const ParameterVector& other) const noexcept {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i].shape() != other.values_[i].shape()) return false;
  }
  return true;
}

bool ParameterVector::equals(const ParameterVector& other) const noexcept {
  if (!same_layout(other)) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const auto a = values_[i].value().data();
    const auto b = other.values_[i].value().data();
    if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

bool ParameterVector::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(),
                     [](const Var& v) { return v.value().all_finite(); });
}

ParameterVector axpy(const ParameterVector& a, double factor, const ParameterVector& b) {
  return zip(a, b, "axpy", [factor](const Var& x, const Var& y) {
    return ops::add(x, ops::scale(y, factor));
  });
}

ParameterVector add(const ParameterVector& a, const ParameterVector& b) {
  return zip(a, b, "add", [](const Var& x, const Var& y) { return ops::add(x, y); });
}

ParameterVector sub(const ParameterVector& a, const ParameterVector& b) {
  return zip(a, b, "sub", [](const Var& x, const Var& y) { return ops::sub(x, y); });
}

ParameterVector scale(const ParameterVector& a, double factor) {
  ParameterVector out;
  for (std::size_t i = 0; i < a.num_segments(); ++i) {
    out.add(a.names()[i], ops::scale(a.var(i), factor));
  }
  return out;
}

double dot(const ParameterVector& a, const ParameterVector& b) {
  require_same_layout(a, b, "dot");
  double total = 0.0;
  for (std::size_t i = 0; i < a.num_segments(); ++i) {
    const auto x = a.var(i).value().data();
    const auto y = b.var(i).value().data();
    for (std::size_t j = 0; j < x.size(); ++j) total += x[j] * y[j];
  }
  return total;
}

double l2_norm(const ParameterVector& p) { return std::sqrt(dot(p, p)); }

ParameterVector gradient(const Var& loss, const ParameterVector& wrt, bool create_graph) {
  std::vector<Var> grads = gradient(loss, std::span<const Var>(wrt.vars()), create_graph);
  ParameterVector out;
  for (std::size_t i = 0; i < grads.size(); ++i) out.add(wrt.names()[i], std::move(grads[i]));
  return out;
}

}  // namespace metaleap
