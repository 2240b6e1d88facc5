#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "metaleap/array.hpp"

namespace metaleap {

struct Node;
class Var;

/// Backward rule: (upstream gradient, op output, op inputs) -> gradient per
/// input. Rules are written with Var ops so they can themselves be recorded.
using BackwardRule =
    std::function<std::vector<Var>(const Var& grad, const Var& out, std::span<const Var> inputs)>;

/// Handle to a node of the computation graph. Cheap to copy; the value it
/// refers to never changes after construction.
class Var {
 public:
  Var() = default;

  /// A value that takes no part in differentiation.
  static Var constant(Array value);
  /// A leaf of the graph; `requires_grad` leaves are differentiable inputs.
  static Var leaf(Array value, bool requires_grad = true);

  const Array& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double item() const { return value().item(); }

  bool defined() const noexcept { return node_ != nullptr; }
  bool requires_grad() const noexcept;
  /// Same value, cut from the graph.
  Var detach() const;

  const Node* node() const noexcept { return node_.get(); }

 private:
  friend Var make_node(Array, std::vector<Var>, BackwardRule, std::string_view);
  friend std::vector<Var> gradient(const Var&, std::span<const Var>, bool);
  explicit Var(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  std::shared_ptr<const Node> node_;
};

struct Node {
  Array value;
  std::vector<Var> parents;
  BackwardRule backward;
  bool requires_grad = false;
  std::string_view op;
};

/// Creates an op output. Records parents only when recording is enabled and
/// some input requires a gradient; otherwise the result is a plain constant.
Var make_node(Array value, std::vector<Var> inputs, BackwardRule rule, std::string_view op);

/// True while ops on the current thread record their inputs.
bool is_recording() noexcept;

/// Disables graph recording on this thread for its lifetime.
class NoRecordGuard {
 public:
  NoRecordGuard();
  ~NoRecordGuard();
  NoRecordGuard(const NoRecordGuard&) = delete;
  NoRecordGuard& operator=(const NoRecordGuard&) = delete;

 private:
  bool previous_;
};

/// Enables graph recording on this thread for its lifetime.
class RecordGuard {
 public:
  RecordGuard();
  ~RecordGuard();
  RecordGuard(const RecordGuard&) = delete;
  RecordGuard& operator=(const RecordGuard&) = delete;

 private:
  bool previous_;
};

/// Reverse-mode gradient of scalar `loss` with respect to each of `wrt`.
/// Inputs that do not reach `loss` get zeros. With `create_graph` the result
/// is recorded and can be differentiated again.
std::vector<Var> gradient(const Var& loss, std::span<const Var> wrt, bool create_graph);

namespace ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);

/// (n x k) . (k x m); both operands must be rank 2.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);
/// Adds a length-m vector to every row of an (n x m) matrix.
Var add_row(const Var& matrix, const Var& row);

Var tanh(const Var& a);
Var relu(const Var& a);
Var square(const Var& a);
Var sqrt(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);
/// Mean over rows of an (n x m) matrix, giving a length-m vector.
Var mean_rows(const Var& a);

Var dot(const Var& a, const Var& b);
Var l2_norm(const Var& a);
/// 1 - <a,b> / (|a| |b|). Throws DegenerateVectorError on a zero-norm operand.
Var cosine_distance(const Var& a, const Var& b);
/// Softmax over the last axis.
Var softmax(const Var& a);

}  // namespace ops

inline Var operator+(const Var& a, const Var& b) { return ops::add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return ops::sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return ops::mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return ops::div(a, b); }
inline Var operator-(const Var& a) { return ops::neg(a); }
inline Var operator*(double s, const Var& a) { return ops::scale(a, s); }
inline Var operator*(const Var& a, double s) { return ops::scale(a, s); }

}  // namespace metaleap
