#include <cmath>

#include <gtest/gtest.h>

#include "metaleap/autodiff.hpp"
#include "metaleap/error.hpp"
#include "metaleap/gradcheck.hpp"
#include "metaleap/parameters.hpp"
#include "metaleap/rng.hpp"

using namespace metaleap;

namespace {

Array random_array(Rng& rng, Shape shape) {
  Array a(std::move(shape));
  for (double& x : a.data()) x = rng.normal();
  return a;
}

ParameterVector single(const std::string& name, Array value) {
  ParameterVector p;
  p.add(name, std::move(value));
  return p;
}

double grad_of(const Var& loss, const Var& x) {
  const Var wrt[] = {x};
  return gradient(loss, wrt, false)[0].item();
}

}  // namespace

TEST(Array, RejectsDataOfWrongLength) {
  EXPECT_THROW(Array(Shape{2, 3}, std::vector<double>(5)), ShapeError);
}

TEST(Array, MatrixViewOfVector) {
  const Array v = Array::vector({1, 2, 3});
  EXPECT_EQ(v.rows(), 1u);
  EXPECT_EQ(v.cols(), 3u);
  EXPECT_EQ(Array::identity(3).at(1, 1), 1.0);
  EXPECT_EQ(Array::identity(3).at(1, 2), 0.0);
}

TEST(Ops, DotOfOrthogonalVectorsIsZero) {
  const Var a = Var::constant(Array::vector({1, 0}));
  const Var b = Var::constant(Array::vector({0, 1}));
  EXPECT_EQ(ops::dot(a, b).item(), 0.0);
}

TEST(Ops, CosineDistanceIdenticalAndAntipodal) {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const Var v = Var::constant(random_array(rng, {5}));
    EXPECT_NEAR(ops::cosine_distance(v, v).item(), 0.0, 1e-15);
  }
  const Var a = Var::constant(Array::vector({1, 0}));
  const Var b = Var::constant(Array::vector({-1, 0}));
  EXPECT_DOUBLE_EQ(ops::cosine_distance(a, b).item(), 2.0);
}

TEST(Ops, CosineDistanceOfZeroVectorIsDegenerate) {
  const Var a = Var::constant(Array::vector({0, 0}));
  const Var b = Var::constant(Array::vector({1, 0}));
  try {
    ops::cosine_distance(a, b);
    FAIL() << "expected DegenerateVectorError";
  } catch (const DegenerateVectorError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate vector"), std::string::npos);
  }
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
  const Var a = Var::constant(Array(Shape{2, 3}));
  const Var b = Var::constant(Array(Shape{3, 2}));
  try {
    ops::add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3, 2]"), std::string::npos) << msg;
  }
  EXPECT_THROW(ops::matmul(a, a), ShapeError);
}

TEST(Ops, OnlyScalarBroadcasts) {
  const Var m = Var::constant(Array(Shape{2, 3}, 1.0));
  const Var s = Var::constant(Array::scalar(2.0));
  const Var r = Var::constant(Array::vector({1, 2, 3}));
  EXPECT_EQ(ops::mul(m, s).value(), Array(Shape{2, 3}, 2.0));
  EXPECT_EQ(ops::add(s, m).value(), Array(Shape{2, 3}, 3.0));
  EXPECT_THROW(ops::add(m, r), ShapeError);
  EXPECT_EQ(ops::add_row(m, r).value().at(1, 2), 4.0);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(9);
  const Var x = Var::constant(random_array(rng, {4, 5}));
  const Array p = ops::softmax(x).value();
  for (std::size_t r = 0; r < 4; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 5; ++c) total += p.at(r, c);
    EXPECT_NEAR(total, 1.0, 1e-15);
  }
}

TEST(Ops, SqrtOfNegativeThrows) {
  EXPECT_THROW(ops::sqrt(Var::constant(Array::vector({-1.0}))), NumericError);
}

TEST(Gradient, SquareAtThree) {
  const Var x = Var::leaf(Array::scalar(3.0));
  EXPECT_DOUBLE_EQ(grad_of(ops::square(x), x), 6.0);
}

TEST(Gradient, CubeFirstAndSecondDerivative) {
  const Var x = Var::leaf(Array::scalar(2.0));
  const Var y = x * x * x;
  const Var wrt[] = {x};
  const Var dy = gradient(y, wrt, true)[0];
  EXPECT_DOUBLE_EQ(dy.item(), 12.0);
  EXPECT_DOUBLE_EQ(gradient(dy, wrt, false)[0].item(), 12.0);
}

TEST(Gradient, SumTanhMatchesCentralDifferences) {
  Rng rng(17);
  const Array w = random_array(rng, {4, 3});
  const Array x = random_array(rng, {3, 2});
  const ScalarObjective f = [&](const ParameterVector& p) {
    return ops::sum(ops::tanh(ops::matmul(p["w"], Var::constant(x))));
  };
  EXPECT_LT(finite_difference_check(f, single("w", w), 1e-5), 1e-6);
}

TEST(Gradient, NonScalarLossThrows) {
  const Var x = Var::leaf(Array::vector({1, 2}));
  const Var wrt[] = {x};
  EXPECT_THROW(gradient(ops::scale(x, 2.0), wrt, false), ShapeError);
}

TEST(Gradient, UnreachedInputGetsZeros) {
  const Var x = Var::leaf(Array::vector({1, 2}));
  const Var unused = Var::leaf(Array(Shape{2, 2}, 5.0));
  const Var wrt[] = {x, unused};
  const auto g = gradient(ops::sum(ops::square(x)), wrt, false);
  EXPECT_EQ(g[1].value(), Array(Shape{2, 2}, 0.0));
  EXPECT_EQ(g[0].value(), Array::vector({2, 4}));
}

TEST(Gradient, NothingRecordedUnderNoRecordGuard) {
  const Var x = Var::leaf(Array::scalar(2.0));
  Var y;
  {
    NoRecordGuard guard;
    y = ops::square(x);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_EQ(grad_of(y, x), 0.0);
}

TEST(Gradient, LinearityOnRandomGraphs) {
  Rng rng(23);
  for (int trial = 0; trial < 25; ++trial) {
    const Var x = Var::leaf(random_array(rng, {3, 3}));
    const Var m = Var::constant(random_array(rng, {3, 3}));
    const double a = rng.normal(), b = rng.normal();
    auto f = [&] { return ops::sum(ops::tanh(ops::matmul(x, m))); };
    auto g = [&] { return ops::sqrt(ops::sum(ops::add_scalar(ops::square(x), 1.0))); };
    const Var wrt[] = {x};
    const Array gf = gradient(f(), wrt, false)[0].value();
    const Array gg = gradient(g(), wrt, false)[0].value();
    const Array gc = gradient(a * f() + b * g(), wrt, false)[0].value();
    for (std::size_t i = 0; i < gc.size(); ++i) {
      EXPECT_NEAR(gc[i], a * gf[i] + b * gg[i], 1e-12);
    }
  }
}

TEST(Gradient, DetachRemovesExactlyThatPath) {
  Rng rng(29);
  const Var x = Var::leaf(random_array(rng, {4}));
  const Var inner = ops::tanh(x);
  const Var full = ops::sum(ops::mul(inner, x));
  const Var cut = ops::sum(ops::mul(inner.detach(), x));
  const Var wrt[] = {x};
  const Array g_full = gradient(full, wrt, false)[0].value();
  const Array g_cut = gradient(cut, wrt, false)[0].value();
  for (std::size_t i = 0; i < 4; ++i) {
    const double t = std::tanh(x.value()[i]);
    EXPECT_NEAR(g_cut[i], t, 1e-15);
    EXPECT_NEAR(g_full[i] - g_cut[i], (1.0 - t * t) * x.value()[i], 1e-15);
  }
}

TEST(Gradient, DoubleBackpropMatchesCentralDifferences) {
  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const Array m = random_array(rng, {10, 10});
    const double alpha = 0.1;
    // f(theta) = |theta - alpha * grad g(theta)|^2, g(theta) = sum tanh(M theta)
    const ScalarObjective f = [&](const ParameterVector& p) {
      RecordGuard record;
      const ParameterVector leaves = p.vars()[0].requires_grad() ? p : p.as_leaves();
      const Var th = leaves["theta"];
      const Var g = ops::sum(ops::tanh(ops::matmul(Var::constant(m), ops::reshape(th, {10, 1}))));
      const ParameterVector grad = gradient(g, leaves, true);
      const Var step = th - alpha * grad["theta"];
      return ops::sum(ops::square(step));
    };
    const ParameterVector theta = single("theta", random_array(rng, {10}));
    EXPECT_LT(finite_difference_check(f, theta, 1e-5), 1e-5);
  }
}

TEST(Gradient, BitIdenticalAcrossRuns) {
  auto run = [] {
    Rng rng(37);
    const Var x = Var::leaf(random_array(rng, {5, 5}));
    const Var y = ops::sum(ops::softmax(ops::tanh(ops::matmul(x, ops::transpose(x)))));
    const Var wrt[] = {x};
    return gradient(y, wrt, false)[0].value();
  };
  EXPECT_EQ(run(), run());
}

TEST(Parameters, DuplicateNamesRejected) {
  ParameterVector p;
  p.add("a", Array::vector({1}));
  EXPECT_THROW(p.add("a", Array::vector({2})), ValidationError);
}

TEST(Parameters, FlattenUnflattenRoundTripsExactly) {
  Rng rng(41);
  ParameterVector p;
  p.add("w", random_array(rng, {3, 4}));
  p.add("b", random_array(rng, {4}));
  p.add("s", Array::scalar(rng.normal()));
  EXPECT_EQ(p.total_dim(), 17u);
  const ParameterVector q = ParameterVector::unflatten(p, p.flatten());
  EXPECT_TRUE(q.equals(p));
  EXPECT_THROW(ParameterVector::unflatten(p, std::vector<double>(16)), ShapeError);
}

TEST(Parameters, ArithmeticIsSegmentwise) {
  ParameterVector a, b;
  a.add("x", Array::vector({1, 2}));
  b.add("x", Array::vector({3, 5}));
  EXPECT_EQ(axpy(a, 2.0, b).array("x"), Array::vector({7, 12}));
  EXPECT_DOUBLE_EQ(dot(a, b), 13.0);
  EXPECT_DOUBLE_EQ(l2_norm(b), std::sqrt(34.0));
  ParameterVector c;
  c.add("y", Array::vector({1, 2}));
  EXPECT_THROW(add(a, c), ShapeError);
}

TEST(GradCheck, QuadraticFormIsExactUpToRoundoff) {
  Rng rng(43);
  const Array a = random_array(rng, {6, 6});
  const ScalarObjective f = [&](const ParameterVector& p) {
    const Var x = ops::reshape(p["x"], {6, 1});
    return ops::sum(ops::mul(x, ops::matmul(Var::constant(a), x)));
  };
  EXPECT_LT(finite_difference_check(f, single("x", random_array(rng, {6})), 1e-5), 1e-8);
}

TEST(GradCheck, TwoLayerTanhNetwork) {
  Rng rng(47);
  const Array x = random_array(rng, {5, 3});
  const Array y = random_array(rng, {5, 2});
  ParameterVector theta;
  theta.add("w1", random_array(rng, {3, 6}));
  theta.add("b1", random_array(rng, {6}));
  theta.add("w2", random_array(rng, {6, 2}));
  const ScalarObjective f = [&](const ParameterVector& p) {
    const Var h = ops::tanh(ops::add_row(ops::matmul(Var::constant(x), p["w1"]), p["b1"]));
    return ops::mean(ops::square(ops::matmul(h, p["w2"]) - Var::constant(y)));
  };
  EXPECT_LT(finite_difference_check(f, theta, 1e-5), 1e-5);
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
  const ScalarObjective f = [](const ParameterVector&) { return Var::constant(Array::scalar(4.0)); };
  EXPECT_EQ(finite_difference_check(f, single("x", Array::vector({1, 2, 3}))), 0.0);
}

TEST(GradCheck, RelativeErrorUsesGuardedDenominator) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.5), 0.5 / 1.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-13), 1e-13 / 1e-12);
  EXPECT_THROW(central_difference_gradient([](const ParameterVector&) { return Var(); },
                                           single("x", Array::vector({1})), 0.0),
               ValidationError);
}
