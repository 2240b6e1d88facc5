#include "metaleap/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "metaleap/error.hpp"

namespace metaleap {

namespace {

thread_local bool g_recording = true;

class RecordingScope {
 public:
  explicit RecordingScope(bool on) : previous_(g_recording) { g_recording = on; }
  ~RecordingScope() { g_recording = previous_; }
  RecordingScope(const RecordingScope&) = delete;
  RecordingScope& operator=(const RecordingScope&) = delete;

 private:
  bool previous_;
};

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

Broadcast check_elementwise(const Array& a, const Array& b, std::string_view op) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (a.rank() == 0) return Broadcast::kLeftScalar;
  if (b.rank() == 0) return Broadcast::kRightScalar;
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                   " vs " + shape_to_string(b.shape()));
}

template <typename F>
Array elementwise(const Array& a, const Array& b, std::string_view op, F f) {
  switch (check_elementwise(a, b, op)) {
    case Broadcast::kNone: {
      Array out(a.shape());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
      return out;
    }
    case Broadcast::kLeftScalar: {
      Array out(b.shape());
      const double s = a[0];
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(s, b[i]);
      return out;
    }
    case Broadcast::kRightScalar: {
      Array out(a.shape());
      const double s = b[0];
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], s);
      return out;
    }
  }
  return {};
}

template <typename F>
Array map(const Array& a, F f) {
  Array out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i]);
  return out;
}

// Sums a broadcast gradient back down to a scalar operand.
Var reduce_to(const Var& grad, const Shape& target) {
  if (target.empty() && grad.shape().size() != 0) return ops::sum(grad);
  return grad;
}

Var ones_like(const Shape& shape) { return Var::constant(Array(shape, 1.0)); }

void require_rank(const Var& a, std::size_t rank, std::string_view op) {
  if (a.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_to_string(a.shape()));
  }
}

}  // namespace

Var Var::constant(Array value) { return leaf(std::move(value), false); }

Var Var::leaf(Array value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->op = "leaf";
  return Var(std::move(node));
}

const Array& Var::value() const {
  if (!node_) throw Error("use of undefined Var");
  return node_->value;
}

bool Var::requires_grad() const noexcept { return node_ && node_->requires_grad; }

Var Var::detach() const { return constant(value()); }

bool is_recording() noexcept { return g_recording; }

NoRecordGuard::NoRecordGuard() : previous_(g_recording) { g_recording = false; }
NoRecordGuard::~NoRecordGuard() { g_recording = previous_; }
RecordGuard::RecordGuard() : previous_(g_recording) { g_recording = true; }
RecordGuard::~RecordGuard() { g_recording = previous_; }

Var make_node(Array value, std::vector<Var> inputs, BackwardRule rule, std::string_view op) {
  const bool track =
      g_recording && std::any_of(inputs.begin(), inputs.end(),
                                 [](const Var& v) { return v.requires_grad(); });
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  if (track) {
    node->parents = std::move(inputs);
    node->backward = std::move(rule);
    node->requires_grad = true;
  }
  return Var(std::move(node));
}

std::vector<Var> gradient(const Var& loss, std::span<const Var> wrt, bool create_graph) {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("gradient: loss must be scalar, got shape " +
                     (loss.defined() ? shape_to_string(loss.shape()) : std::string("<undefined>")));
  }

  // Post-order over the recorded graph: every node appears after its parents.
  std::vector<Var> order;
  std::unordered_map<const Node*, std::size_t> index;
  if (loss.requires_grad()) {
    std::vector<std::pair<Var, std::size_t>> stack;
    std::unordered_set<const Node*> seen;
    stack.emplace_back(loss, 0);
    seen.insert(loss.node());
    while (!stack.empty()) {
      auto& [var, next] = stack.back();
      const auto& parents = var.node()->parents;
      if (next < parents.size()) {
        const Var& parent = parents[next++];
        if (parent.requires_grad() && seen.insert(parent.node()).second) {
          stack.emplace_back(parent, 0);
        }
        continue;
      }
      index.emplace(var.node(), order.size());
      order.push_back(var);
      stack.pop_back();
    }
  }

  std::unordered_set<const Node*> targets;
  for (const Var& w : wrt) {
    if (w.defined()) targets.insert(w.node());
  }
  std::vector<char> relevant(order.size(), 0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Node* n = order[i].node();
    bool r = targets.count(n) > 0;
    for (const Var& p : n->parents) {
      if (r) break;
      auto it = index.find(p.node());
      r = it != index.end() && relevant[it->second];
    }
    relevant[i] = r;
  }

  RecordingScope scope(create_graph);
  std::vector<Var> grads(order.size());
  if (!order.empty()) grads.back() = ones_like(loss.shape());

  for (std::size_t i = order.size(); i-- > 0;) {
    const Var& out = order[i];
    const Node* n = out.node();
    if (!relevant[i] || !grads[i].defined() || n->parents.empty()) continue;
    std::vector<Var> parent_grads = n->backward(grads[i], out, n->parents);
    for (std::size_t j = 0; j < n->parents.size(); ++j) {
      const Var& p = n->parents[j];
      if (!p.requires_grad() || !parent_grads[j].defined()) continue;
      const std::size_t k = index.at(p.node());
      if (!relevant[k]) continue;
      grads[k] = grads[k].defined() ? ops::add(grads[k], parent_grads[j]) : parent_grads[j];
    }
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (const Var& w : wrt) {
    auto it = w.defined() ? index.find(w.node()) : index.end();
    if (it != index.end() && grads[it->second].defined()) {
      result.push_back(create_graph ? grads[it->second] : grads[it->second].detach());
    } else if (!loss.requires_grad() && w.defined() && w.node() == loss.node()) {
      result.push_back(ones_like(loss.shape()));
    } else {
      result.push_back(Var::constant(Array(w.defined() ? w.shape() : Shape{}, 0.0)));
    }
  }
  return result;
}

namespace ops {

Var add(const Var& a, const Var& b) {
  return make_node(
      elementwise(a.value(), b.value(), "add", [](double x, double y) { return x + y; }), {a, b},
      [](const Var& g, const Var&, std::span<const Var> in) {
        return std::vector<Var>{reduce_to(g, in[0].shape()), reduce_to(g, in[1].shape())};
      },
      "add");
}

Var sub(const Var& a, const Var& b) {
  return make_node(
      elementwise(a.value(), b.value(), "sub", [](double x, double y) { return x - y; }), {a, b},
      [](const Var& g, const Var&, std::span<const Var> in) {
        return std::vector<Var>{reduce_to(g, in[0].shape()), reduce_to(neg(g), in[1].shape())};
      },
      "sub");
}

Var mul(const Var& a, const Var& b) {
  return make_node(
      elementwise(a.value(), b.value(), "mul", [](double x, double y) { return x * y; }), {a, b},
      [](const Var& g, const Var&, std::span<const Var> in) {
        return std::vector<Var>{reduce_to(mul(g, in[1]), in[0].shape()),
                                reduce_to(mul(g, in[0]), in[1].shape())};
      },
      "mul");
}

Var div(const Var& a, const Var& b) {
  return make_node(
      elementwise(a.value(), b.value(), "div", [](double x, double y) { return x / y; }), {a, b},
      [](const Var& g, const Var& out, std::span<const Var> in) {
        return std::vector<Var>{reduce_to(div(g, in[1]), in[0].shape()),
                                reduce_to(neg(div(mul(g, out), in[1])), in[1].shape())};
      },
      "div");
}

Var neg(const Var& a) {
  return make_node(
      map(a.value(), [](double x) { return -x; }), {a},
      [](const Var& g, const Var&, std::span<const Var>) { return std::vector<Var>{neg(g)}; },
      "neg");
}

Var scale(const Var& a, double factor) {
  return make_node(
      map(a.value(), [factor](double x) { return factor * x; }), {a},
      [factor](const Var& g, const Var&, std::span<const Var>) {
        return std::vector<Var>{scale(g, factor)};
      },
      "scale");
}

Var add_scalar(const Var& a, double offset) {
  return make_node(
      map(a.value(), [offset](double x) { return x + offset; }), {a},
      [](const Var& g, const Var&, std::span<const Var>) { return std::vector<Var>{g}; },
      "add_scalar");
}

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const Array& x = a.value();
  const Array& y = b.value();
  const std::size_t n = x.shape()[0], k = x.shape()[1], m = y.shape()[1];
  if (y.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_to_string(x.shape()) + " vs " +
                     shape_to_string(y.shape()));
  }
  Array out(Shape{n, m});
  const double* xp = x.data().data();
  const double* yp = y.data().data();
  double* op = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = op + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = xp[i * k + p];
      if (s == 0.0) continue;
      const double* yrow = yp + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += s * yrow[j];
    }
  }
  return make_node(
      std::move(out), {a, b},
      [](const Var& g, const Var&, std::span<const Var> in) {
        return std::vector<Var>{matmul(g, transpose(in[1])), matmul(transpose(in[0]), g)};
      },
      "matmul");
}

Var transpose(const Var& a) {
  require_rank(a, 2, "transpose");
  const Array& x = a.value();
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  Array out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  return make_node(
      std::move(out), {a},
      [](const Var& g, const Var&, std::span<const Var>) {
        return std::vector<Var>{transpose(g)};
      },
      "transpose");
}

Var reshape(const Var& a, Shape shape) {
  Array out = a.value().reshaped(std::move(shape));
  return make_node(
      std::move(out), {a},
      [](const Var& g, const Var&, std::span<const Var> in) {
        return std::vector<Var>{reshape(g, in[0].shape())};
      },
      "reshape");
}

Var add_row(const Var& matrix, const Var& row) {
  require_rank(matrix, 2, "add_row");
  require_rank(row, 1, "add_row");
  const Array& x = matrix.value();
  const Array& r = row.value();
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  if (r.size() != m) {
    throw ShapeError("add_row: shape mismatch " + shape_to_string(x.shape()) + " vs " +
                     shape_to_string(r.shape()));
  }
  Array out = x;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += r[j];
  return make_node(
      std::move(out), {matrix, row},
      [](const Var& g, const Var&, std::span<const Var> in) {
        const std::size_t rows = in[0].shape()[0];
        Var ones = Var::constant(Array(Shape{1, rows}, 1.0));
        return std::vector<Var>{g, reshape(matmul(ones, g), in[1].shape())};
      },
      "add_row");
}

Var tanh(const Var& a) {
  return make_node(
      map(a.value(), [](double x) { return std::tanh(x); }), {a},
      [](const Var& g, const Var& out, std::span<const Var>) {
        return std::vector<Var>{mul(g, add_scalar(neg(square(out)), 1.0))};
      },
      "tanh");
}

Var relu(const Var& a) {
  return make_node(
      map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), {a},
      [](const Var& g, const Var&, std::span<const Var> in) {
        Var mask = Var::constant(map(in[0].value(), [](double x) { return x > 0.0 ? 1.0 : 0.0; }));
        return std::vector<Var>{mul(g, mask)};
      },
      "relu");
}

Var square(const Var& a) {
  return make_node(
      map(a.value(), [](double x) { return x * x; }), {a},
      [](const Var& g, const Var&, std::span<const Var> in) {
        return std::vector<Var>{scale(mul(g, in[0]), 2.0)};
      },
      "square");
}

Var sqrt(const Var& a) {
  for (double v : a.value().data()) {
    if (v < 0.0) throw NumericError("sqrt of negative value");
  }
  return make_node(
      map(a.value(), [](double x) { return std::sqrt(x); }), {a},
      [](const Var& g, const Var& out, std::span<const Var>) {
        return std::vector<Var>{div(scale(g, 0.5), out)};
      },
      "sqrt");
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return make_node(
      Array::scalar(total), {a},
      [](const Var& g, const Var&, std::span<const Var> in) {
        return std::vector<Var>{mul(g, ones_like(in[0].shape()))};
      },
      "sum");
}

Var mean(const Var& a) {
  if (a.size() == 0) throw ShapeError("mean of empty array");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Var mean_rows(const Var& a) {
  require_rank(a, 2, "mean_rows");
  const std::size_t n = a.shape()[0];
  if (n == 0) throw ShapeError("mean_rows of empty matrix");
  const std::size_t m = a.shape()[1];
  const Array& x = a.value();
  Array out(Shape{m});
  std::vector<double> column(n);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = x.at(i, j);
    std::sort(column.begin(), column.end());
    double acc = 0.0;
    for (double v : column) acc += v;
    out[j] = acc / static_cast<double>(n);
  }
  return make_node(
      std::move(out), {a},
      [n, m](const Var& g, const Var&, std::span<const Var>) {
        Var spread = Var::constant(Array(Shape{n, 1}, 1.0 / static_cast<double>(n)));
        return std::vector<Var>{matmul(spread, reshape(g, Shape{1, m}))};
      },
      "mean_rows");
}

Var dot(const Var& a, const Var& b) {
  require_rank(a, 1, "dot");
  require_rank(b, 1, "dot");
  if (a.shape() != b.shape()) {
    throw ShapeError("dot: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  return sum(mul(a, b));
}

Var l2_norm(const Var& a) { return sqrt(sum(square(a))); }

Var cosine_distance(const Var& a, const Var& b) {
  Var d = dot(a, b);
  Var na = l2_norm(a);
  Var nb = l2_norm(b);
  if (na.item() == 0.0 || nb.item() == 0.0) throw DegenerateVectorError("cosine_distance");
  return add_scalar(neg(div(d, mul(na, nb))), 1.0);
}

Var softmax(const Var& a) {
  const Array& x = a.value();
  if (x.rank() != 1 && x.rank() != 2) {
    throw ShapeError("softmax: expected rank 1 or 2, got shape " + shape_to_string(x.shape()));
  }
  const std::size_t rows = x.rows(), cols = x.cols();
  Array out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double hi = x[r * cols];
    for (std::size_t c = 1; c < cols; ++c) hi = std::max(hi, x[r * cols + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = std::exp(x[r * cols + c] - hi);
      z += out[r * cols + c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= z;
  }
  return make_node(
      std::move(out), {a},
      [](const Var& g, const Var& out, std::span<const Var>) {
        Var weighted = mul(g, out);
        if (out.shape().size() == 1) {
          return std::vector<Var>{mul(out, sub(g, sum(weighted)))};
        }
        const std::size_t m = out.shape()[1];
        Var row_sums = matmul(weighted, Var::constant(Array(Shape{m, 1}, 1.0)));
        Var spread = matmul(row_sums, Var::constant(Array(Shape{1, m}, 1.0)));
        return std::vector<Var>{mul(out, sub(g, spread))};
      },
      "softmax");
}

}  // namespace ops

}  // namespace metaleap
