#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metaleap/array.hpp"
#include "metaleap/autodiff.hpp"

namespace metaleap {

/// Named, ordered set of parameter tensors: the flat vector a meta-learner
/// optimizes. Each segment is a graph node, so a ParameterVector produced
/// inside a recorded computation stays differentiable w.r.t. its inputs.
class ParameterVector {
 public:
  ParameterVector() = default;

  /// Appends a segment. Names must be unique.
  void add(std::string name, Var value);
  void add(std::string name, Array value) { add(std::move(name), Var::constant(std::move(value))); }

  std::size_t num_segments() const noexcept { return values_.size(); }
  std::size_t total_dim() const noexcept;
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<Var>& vars() const noexcept { return values_; }
  const Var& var(std::size_t i) const { return values_.at(i); }
  const Var& operator[](std::string_view name) const;
  const Array& array(std::string_view name) const { return (*this)[name].value(); }
  bool contains(std::string_view name) const noexcept;

  /// Fresh leaves with the same values that require gradients.
  ParameterVector as_leaves() const;
  /// Same values cut from any graph.
  ParameterVector detached() const;

  std::vector<double> flatten() const;
  /// Inverse of flatten, using `layout` for names and shapes.
  static ParameterVector unflatten(const ParameterVector& layout, std::span<const double> flat);

  /// Same names and shapes as `layout`, all zeros.
  static ParameterVector zeros_like(const ParameterVector& layout);

  /// True when names and shapes agree segment by segment.
  bool same_layout(const ParameterVector& other) const noexcept;

  /// Bitwise equality of names, shapes and values.
  bool equals(const ParameterVector& other) const noexcept;

  bool all_finite() const noexcept;

 private:
  std::vector<std::string> names_;
  std::vector<Var> values_;
};

// Segment-wise arithmetic built from graph ops (recorded when inputs require grad).

/// a + factor * b
ParameterVector axpy(const ParameterVector& a, double factor, const ParameterVector& b);
ParameterVector add(const ParameterVector& a, const ParameterVector& b);
ParameterVector sub(const ParameterVector& a, const ParameterVector& b);
ParameterVector scale(const ParameterVector& a, double factor);

double l2_norm(const ParameterVector& p);
double dot(const ParameterVector& a, const ParameterVector& b);

/// Gradient of a scalar loss w.r.t. every segment of `wrt`; layout preserved.
ParameterVector gradient(const Var& loss, const ParameterVector& wrt, bool create_graph = false);

}  // namespace metaleap
