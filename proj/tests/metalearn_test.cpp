#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "metaleap/error.hpp"
#include "metaleap/experiment.hpp"
#include "metaleap/gradcheck.hpp"
#include "metaleap/metalearn.hpp"
#include "metaleap/model.hpp"
#include "metaleap/selftest.hpp"

using namespace metaleap;

namespace {

/// L(theta) = sum theta^2 on every batch.
Task square_task(std::string id = "square") {
  Task t;
  t.id = std::move(id);
  t.sample_support = [](Rng&) -> Batch { return RegressionBatch{}; };
  t.sample_query = t.sample_support;
  t.loss = [](const ParameterVector& p, const Batch&) { return ops::sum(ops::square(p.var(0))); };
  return t;
}

ParameterVector vector_theta(std::vector<double> v) {
  ParameterVector p;
  p.add("theta", Array::vector(std::move(v)));
  return p;
}

double value_of(const ParameterVector& p) { return p.var(0).value()[0]; }

MetaConfig config(Algorithm a, double alpha, std::size_t k, double beta = 0.1) {
  MetaConfig c;
  c.algorithm = a;
  c.alpha = alpha;
  c.beta = beta;
  c.inner_steps = k;
  return c;
}

Array random_array(Rng& rng, Shape shape, double sd = 1.0) {
  Array a(std::move(shape));
  for (double& x : a.data()) x = sd * rng.normal();
  return a;
}

MlpConfig small_mlp() {
  MlpConfig m;
  m.input_dim = 1;
  m.hidden_dim = 5;
  m.output_dim = 1;
  m.hidden_layers = 1;
  m.activation = Activation::kTanh;
  return m;
}

/// MLP regression task whose support and query batches are fixed draws.
Task fixed_mlp_task(const MlpConfig& m, std::uint64_t seed, std::string id) {
  Rng rng(seed);
  RegressionBatch support{random_array(rng, {6, 1}), random_array(rng, {6, 1})};
  RegressionBatch query{random_array(rng, {6, 1}), random_array(rng, {6, 1})};
  Task t;
  t.id = std::move(id);
  t.sample_support = [support](Rng&) -> Batch { return support; };
  t.sample_query = [query](Rng&) -> Batch { return query; };
  t.loss = [m](const ParameterVector& p, const Batch& b) {
    const auto& rb = std::get<RegressionBatch>(b);
    return mse_loss(m, p, rb.inputs, rb.targets);
  };
  return t;
}

ParameterVector random_mlp_params(const MlpConfig& m, Rng& rng) {
  const ParameterVector layout = init_params(m, 1);
  ParameterVector p;
  for (std::size_t i = 0; i < layout.num_segments(); ++i) {
    p.add(layout.names()[i], random_array(rng, layout.var(i).shape(), 0.8));
  }
  return p;
}

Trajectory make_trajectory(const std::vector<std::vector<double>>& thetas,
                           const std::vector<double>& losses) {
  Trajectory t;
  for (std::size_t i = 0; i < thetas.size(); ++i) t.points.push_back({vector_theta(thetas[i]), losses[i]});
  return t;
}

double endpoint_distance(const Trajectory& t) {
  const auto a = t.points.front().theta.flatten();
  const auto b = t.points.back().theta.flatten();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  const double dl = t.points.back().loss_value - t.points.front().loss_value;
  return std::sqrt(s + dl * dl);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST(MetaConfig, ValidatesAndParses) {
  MetaConfig c;
  EXPECT_NO_THROW(c.validate());
  c.inner_steps = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_EQ(parse_algorithm("leap"), Algorithm::kLeap);
  EXPECT_EQ(to_string(Algorithm::kFomaml), "fomaml");
  EXPECT_THROW(parse_algorithm("reptile"), ValidationError);
  const MetaConfig leap = MetaConfig::defaults_for(Algorithm::kLeap);
  const MetaConfig maml = MetaConfig::defaults_for(Algorithm::kMaml);
  EXPECT_EQ(leap.inner_steps, 64u);
  EXPECT_EQ(maml.inner_steps, 4u);
  EXPECT_DOUBLE_EQ(leap.alpha, 5e-4);
  EXPECT_DOUBLE_EQ(leap.beta, 1e-4);
  EXPECT_DOUBLE_EQ(maml.beta, 1e-5);
}

TEST(InnerUpdate, OneDimensionalSquare) {
  const ParameterVector out = inner_update(scalar_theta(1.0), square_task(), RegressionBatch{}, 0.1);
  EXPECT_DOUBLE_EQ(value_of(out), 0.8);
}

TEST(InnerUpdate, TenDimensionalQuadraticScalesByNinetyPercent) {
  Rng rng(3);
  std::vector<double> v(10);
  for (double& x : v) x = rng.normal();
  const auto out = inner_update(vector_theta(v), quadratic_task(), RegressionBatch{}, 0.1).flatten();
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(out[i], 0.9 * v[i], 1e-15);
}

TEST(InnerUpdate, RejectsNonPositiveStep) {
  EXPECT_THROW(inner_update(scalar_theta(1.0), square_task(), RegressionBatch{}, 0.0), ValidationError);
}

TEST(InnerUpdate, NonFiniteGradientNamesTaskAndStep) {
  Task t = square_task("blowup");
  t.loss = [](const ParameterVector& p, const Batch&) { return ops::sum(ops::sqrt(p.var(0))); };
  try {
    inner_update(scalar_theta(0.0), t, RegressionBatch{}, 0.1, false, 7);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("blowup"), std::string::npos) << msg;
    EXPECT_NE(msg.find("7"), std::string::npos) << msg;
  }
}

TEST(Trajectory, HandCaseAndLength) {
  Rng rng(1);
  const Trajectory t = run_trajectory(scalar_theta(1.0), square_task(), config(Algorithm::kLeap, 0.1, 1), rng);
  ASSERT_EQ(t.points.size(), 2u);
  EXPECT_DOUBLE_EQ(value_of(t.points[0].theta), 1.0);
  EXPECT_DOUBLE_EQ(t.points[0].loss_value, 1.0);
  EXPECT_DOUBLE_EQ(value_of(t.points[1].theta), 0.8);
  EXPECT_EQ(t.steps(), 1u);

  const Task sin = sample_sinusoid_task(rng, MlpConfig{}, 5);
  for (std::size_t k : {1u, 3u, 7u}) {
    Rng r(2);
    const Trajectory tk = run_trajectory(init_params(MlpConfig{}, 1), sin, config(Algorithm::kLeap, 0.01, k), r);
    EXPECT_EQ(tk.points.size(), k + 1);
    EXPECT_EQ(tk.gradients.size(), k);
    EXPECT_EQ(tk.batches.size(), k + 1);
  }
}

TEST(Trajectory, SameSeedGivesIdenticalTrajectories) {
  Rng task_rng(4);
  const Task task = sample_sinusoid_task(task_rng, MlpConfig{}, 5);
  const ParameterVector theta = init_params(MlpConfig{}, 9);
  Rng a(11), b(11);
  const Trajectory ta = run_trajectory(theta, task, config(Algorithm::kLeap, 0.01, 5), a);
  const Trajectory tb = run_trajectory(theta, task, config(Algorithm::kLeap, 0.01, 5), b);
  for (std::size_t i = 0; i < ta.points.size(); ++i) {
    EXPECT_TRUE(ta.points[i].theta.equals(tb.points[i].theta));
    EXPECT_EQ(ta.points[i].loss_value, tb.points[i].loss_value);
  }
}

TEST(Maml, QuadraticExactValues) {
  const Rng rng(0);
  const auto k1 = maml_meta_gradient(scalar_theta(1.0), {quadratic_task()}, config(Algorithm::kMaml, 0.1, 1), rng);
  EXPECT_NEAR(value_of(k1.gradient), 0.81, 1e-12);
  const auto k2 = maml_meta_gradient(scalar_theta(1.0), {quadratic_task()}, config(Algorithm::kMaml, 0.1, 2), rng);
  EXPECT_NEAR(value_of(k2.gradient), 0.6561, 1e-12);
}

TEST(Maml, RatioToFirstOrderIsOneMinusAlphaToTheK) {
  const Rng rng(0);
  for (std::size_t k = 1; k <= 5; ++k) {
    for (double alpha : {0.05, 0.1, 0.3}) {
      const double m = value_of(maml_meta_gradient(scalar_theta(1.5), {quadratic_task()}, config(Algorithm::kMaml, alpha, k), rng).gradient);
      const double f = value_of(fomaml_meta_gradient(scalar_theta(1.5), {quadratic_task()}, config(Algorithm::kFomaml, alpha, k), rng).gradient);
      EXPECT_NEAR(m / f, std::pow(1.0 - alpha, k), 1e-12);
    }
  }
}

TEST(Fomaml, QuadraticValue) {
  const auto g = fomaml_meta_gradient(scalar_theta(1.0), {quadratic_task()}, config(Algorithm::kFomaml, 0.1, 1), Rng(0));
  EXPECT_NEAR(value_of(g.gradient), 0.9, 1e-12);
}

TEST(Maml, RejectsMismatchedAlgorithmAndEmptyBatch) {
  EXPECT_THROW(maml_meta_gradient(scalar_theta(1.0), {quadratic_task()}, config(Algorithm::kLeap, 0.1, 1), Rng(0)), ValidationError);
  EXPECT_THROW(maml_meta_gradient(scalar_theta(1.0), {}, config(Algorithm::kMaml, 0.1, 1), Rng(0)), ValidationError);
}

TEST(Maml, MetaGradientMatchesFiniteDifferencesOfUnrolledObjective) {
  const MlpConfig m = small_mlp();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    const ParameterVector theta = random_mlp_params(m, rng);
    const std::vector<Task> tasks{fixed_mlp_task(m, 10 * seed, "a"), fixed_mlp_task(m, 10 * seed + 1, "b")};
    for (std::size_t k : {1u, 3u, 4u}) {
      const MetaConfig cfg = config(Algorithm::kMaml, 0.05, k);
      MetaConfig fo = cfg;
      fo.algorithm = Algorithm::kFomaml;
      const ScalarObjective objective = [&](const ParameterVector& p) {
        const auto r = fomaml_meta_gradient(p, tasks, fo, Rng(0));
        double total = 0.0;
        for (double v : r.task_objectives) total += v;
        return Var::constant(Array::scalar(total));
      };
      const auto analytic = maml_meta_gradient(theta, tasks, cfg, Rng(0)).gradient.flatten();
      const auto numeric = central_difference_gradient(objective, theta, 1e-5);
      EXPECT_LT(max_relative_error(analytic, numeric), 1e-4) << "seed " << seed << " K " << k;
    }
  }
}

TEST(Maml, SelftestOracleAgrees) {
  for (std::uint64_t seed : {4u, 5u}) EXPECT_LT(maml_finite_difference_error(seed, 3), 1e-4);
}

TEST(Maml, SmallStepLimitIsPlainQueryGradient) {
  const MlpConfig m = small_mlp();
  Rng rng(6);
  const ParameterVector theta = random_mlp_params(m, rng);
  const Task task = fixed_mlp_task(m, 77, "t");
  const auto meta = maml_meta_gradient(theta, {task}, config(Algorithm::kMaml, 1e-6, 1), Rng(0)).gradient;
  Rng unused(0);
  const Batch query = task.sample_query(unused);
  const ParameterVector leaves = theta.as_leaves();
  const ParameterVector plain = gradient(task.loss(leaves, query), leaves);
  const double diff = l2_norm(sub(meta, plain)) / l2_norm(plain);
  EXPECT_LT(diff, 1e-3);
}

TEST(Maml, QuadraticTasksGiveParallelFirstAndSecondOrderDirections) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> v(6);
    for (double& x : v) x = rng.normal();
    const auto m = maml_meta_gradient(vector_theta(v), {quadratic_task("a"), quadratic_task("b")}, config(Algorithm::kMaml, 0.2, 3), Rng(1)).gradient.flatten();
    const auto f = fomaml_meta_gradient(vector_theta(v), {quadratic_task("a"), quadratic_task("b")}, config(Algorithm::kFomaml, 0.2, 3), Rng(1)).gradient.flatten();
    EXPECT_NEAR(cosine(m, f), 1.0, 1e-8);
  }
}

TEST(Chordal, HandInstances) {
  EXPECT_EQ(cumulative_chordal_distance(make_trajectory({{2.0}}, {7.0})), 0.0);
  EXPECT_DOUBLE_EQ(cumulative_chordal_distance(make_trajectory({{0.0}, {3.0}}, {1.0, 5.0})), 5.0);
  EXPECT_THROW(cumulative_chordal_distance(Trajectory{}), ValidationError);
}

TEST(Chordal, DuplicatePointLeavesDistanceUnchanged) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(6);
    std::vector<std::vector<double>> th;
    std::vector<double> ls;
    for (std::size_t i = 0; i < n; ++i) {
      th.push_back({rng.normal(), rng.normal()});
      ls.push_back(rng.normal());
    }
    const double base = cumulative_chordal_distance(make_trajectory(th, ls));
    const std::size_t at = rng.uniform_index(n);
    th.insert(th.begin() + static_cast<std::ptrdiff_t>(at), th[at]);
    ls.insert(ls.begin() + static_cast<std::ptrdiff_t>(at), ls[at]);
    EXPECT_NEAR(cumulative_chordal_distance(make_trajectory(th, ls)), base, 1e-12 * (1.0 + base));
  }
}

TEST(Chordal, EndpointLowerBoundAndCollinearEquality) {
  Rng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(10);
    std::vector<std::vector<double>> th;
    std::vector<double> ls;
    for (std::size_t i = 0; i < n; ++i) {
      th.push_back({rng.normal(), rng.normal(), rng.normal()});
      ls.push_back(rng.uniform(0.0, 2.0));
    }
    const Trajectory t = make_trajectory(th, ls);
    EXPECT_GE(cumulative_chordal_distance(t), endpoint_distance(t) * (1.0 - 1e-12));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<double> a{rng.normal(), rng.normal()}, b{rng.normal(), rng.normal()};
    const double la = rng.normal(), lb = rng.normal();
    std::vector<double> ts{0.0, 1.0};
    for (int i = 0; i < 4; ++i) ts.push_back(rng.uniform());
    std::sort(ts.begin(), ts.end());
    std::vector<std::vector<double>> th;
    std::vector<double> ls;
    for (double s : ts) {
      th.push_back({a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])});
      ls.push_back(la + s * (lb - la));
    }
    const Trajectory t = make_trajectory(th, ls);
    EXPECT_NEAR(cumulative_chordal_distance(t), endpoint_distance(t), 1e-12);
  }
}

TEST(PullForward, HandInstanceAndIdentity) {
  const Trajectory t = make_trajectory({{1.0}, {0.9}}, {0.5, 0.405});
  EXPECT_NEAR(pull_forward_distance(t, t), std::sqrt(0.019025), 1e-15);
  EXPECT_EQ(pull_forward_distance(t, t), cumulative_chordal_distance(t));
  const Trajectory zero = make_trajectory({{0.0}, {0.0}, {0.0}}, {0.0, 0.0, 0.0});
  EXPECT_EQ(pull_forward_distance(zero, zero), 0.0);
  EXPECT_THROW(pull_forward_distance(t, zero), ValidationError);
}

TEST(PullForward, MixesBaselineNextPoints) {
  const Trajectory cur = make_trajectory({{0.0}, {5.0}}, {0.0, 9.0});
  const Trajectory base = make_trajectory({{7.0}, {3.0}}, {1.0, 4.0});
  EXPECT_DOUBLE_EQ(pull_forward_distance(cur, base), 5.0);
}

TEST(LeapIncrement, HandInstance) {
  const TrajectoryPoint cur{scalar_theta(1.0), 0.5};
  const TrajectoryPoint next{scalar_theta(0.9), 0.405};
  const double inc = value_of(leap_increment(cur, next, scalar_theta(1.0), 1e-12));
  EXPECT_NEAR(inc, 1.41375, 1e-5);
  EXPECT_NEAR(inc, 0.195 / std::sqrt(0.019025), 1e-14);
}

TEST(LeapIncrement, StationaryPointGivesZero) {
  const TrajectoryPoint p{vector_theta({0.3, -0.2}), 0.7};
  const auto inc = leap_increment(p, p, vector_theta({0.0, 0.0}), 1e-12).flatten();
  EXPECT_EQ(inc[0], 0.0);
  EXPECT_EQ(inc[1], 0.0);
  EXPECT_THROW(leap_increment(p, p, scalar_theta(0.0), 1e-12), ShapeError);
}

TEST(LeapIncrement, MatchesFiniteDifferenceOfFrozenSegment) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> th(4), nx(4), g(4);
    for (double& x : th) x = rng.normal();
    for (double& x : nx) x = rng.normal();
    for (double& x : g) x = rng.normal();
    const double loss = rng.uniform(0, 2), next_loss = rng.uniform(0, 2);
    // Segment length as a function of theta, with the loss coordinate linearized along g.
    auto seg = [&](const std::vector<double>& t) {
      double s = 0.0, lin = loss;
      for (int i = 0; i < 4; ++i) {
        s += (t[i] - nx[i]) * (t[i] - nx[i]);
        lin += g[i] * (t[i] - th[i]);
      }
      return std::sqrt(s + (lin - next_loss) * (lin - next_loss));
    };
    const auto inc = leap_increment({vector_theta(th), loss}, {vector_theta(nx), next_loss}, vector_theta(g), 1e-12).flatten();
    for (int i = 0; i < 4; ++i) {
      auto up = th, down = th;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      EXPECT_LT(relative_error(inc[i], (seg(up) - seg(down)) / 2e-6), 1e-6);
    }
  }
}

TEST(LeapStep, HandInstance) {
  const LeapStep s = leap_meta_step(scalar_theta(1.0), {quadratic_task()}, config(Algorithm::kLeap, 0.1, 1, 0.1), Rng(0));
  EXPECT_NEAR(value_of(s.theta), 0.858625, 1e-5);
  EXPECT_NEAR(value_of(s.theta), 1.0 - 0.1 * 0.195 / std::sqrt(0.019025), 1e-14);
  EXPECT_EQ(s.accumulator.tasks_seen, 1u);
  ASSERT_EQ(s.task_distances.size(), 1u);
  EXPECT_NEAR(s.task_distances[0], std::sqrt(0.019025), 1e-15);
}

TEST(LeapStep, TwoIdenticalTasksEqualOneTask) {
  Rng rng(5);
  const Task task = sample_sinusoid_task(rng, MlpConfig{}, 5);
  const ParameterVector theta = init_params(MlpConfig{}, 2);
  const MetaConfig cfg = config(Algorithm::kLeap, 0.01, 4, 0.05);
  const LeapStep one = leap_meta_step(theta, {task}, cfg, Rng(9));
  const LeapStep two = leap_meta_step(theta, {task, task}, cfg, Rng(9));
  EXPECT_TRUE(one.theta.equals(two.theta));
}

TEST(LeapStep, StationaryTasksDoNotMove) {
  const ParameterVector zero = vector_theta({0.0, 0.0, 0.0});
  const LeapStep s = leap_meta_step(zero, {quadratic_task("a"), quadratic_task("b")}, config(Algorithm::kLeap, 0.1, 5), Rng(0));
  EXPECT_TRUE(s.theta.equals(zero));
}

TEST(LeapStep, AccumulatedGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (std::size_t k : {1u, 3u}) EXPECT_LT(leap_finite_difference_error(seed, k), 1e-4) << seed << " " << k;
  }
}

TEST(MetaStep, BitReproducible) {
  Rng rng(7);
  const Task a = sample_sinusoid_task(rng, MlpConfig{}, 5);
  const Task b = sample_sinusoid_task(rng, MlpConfig{}, 5);
  const ParameterVector theta = init_params(MlpConfig{}, 3);
  for (Algorithm alg : {Algorithm::kMaml, Algorithm::kFomaml, Algorithm::kLeap}) {
    const MetaConfig cfg = config(alg, 0.01, 3, 0.01);
    const auto x = meta_step(theta, {a, b}, cfg, Rng(4));
    const auto y = meta_step(theta, {a, b}, cfg, Rng(4));
    EXPECT_TRUE(x.theta.equals(y.theta)) << to_string(alg);
    EXPECT_EQ(x.task_objectives, y.task_objectives);
  }
}

TEST(MetaStep, ClippingBoundsTheStep) {
  const MetaConfig base = config(Algorithm::kFomaml, 0.1, 1, 1.0);
  MetaConfig clipped = base;
  clipped.clip_norm = 0.01;
  const auto s = meta_step(vector_theta({3.0, 4.0}), {quadratic_task()}, clipped, Rng(0));
  EXPECT_NEAR(l2_norm(sub(s.theta, vector_theta({3.0, 4.0}))), 0.01, 1e-14);
  EXPECT_GT(s.gradient_norm, 0.01);
}

TEST(AdaptOov, RejectsZeroIterations) {
  EXPECT_THROW(adapt_oov(scalar_theta(1.0), quadratic_task(), quadratic_task(), config(Algorithm::kLeap, 0.1, 1), 0, Rng(0)), ValidationError);
}

TEST(AdaptOov, IdenticalCorporaMatchSingleTaskAdaptation) {
  Rng rng(14);
  const Task task = sample_sinusoid_task(rng, MlpConfig{}, 5);
  const ParameterVector theta = init_params(MlpConfig{}, 6);
  const MetaConfig cfg = config(Algorithm::kLeap, 0.01, 3, 0.05);
  std::vector<ParameterVector> single_seq, pair_seq;
  meta_train_fixed(theta, {task}, cfg, 5, Rng(2), [&](std::size_t, const MetaStepResult& r) { single_seq.push_back(r.theta); });
  adapt_oov(theta, task, task, cfg, 5, Rng(2), [&](std::size_t, const MetaStepResult& r) { pair_seq.push_back(r.theta); });
  ASSERT_EQ(single_seq.size(), pair_seq.size());
  for (std::size_t i = 0; i < single_seq.size(); ++i) EXPECT_TRUE(single_seq[i].equals(pair_seq[i])) << i;
}

TEST(AdaptOov, MamlDirectionDoublesForIdenticalCorpora) {
  Rng rng(15);
  const Task task = sample_sinusoid_task(rng, MlpConfig{}, 5);
  const ParameterVector theta = init_params(MlpConfig{}, 6);
  const MetaConfig cfg = config(Algorithm::kMaml, 0.01, 2, 0.01);
  const auto one = maml_meta_gradient(theta, {task}, cfg, Rng(3)).gradient.flatten();
  const auto two = maml_meta_gradient(theta, {task, task}, cfg, Rng(3)).gradient.flatten();
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_EQ(two[i], 2.0 * one[i]);
}

TEST(AdaptOov, LeapLowersHeldOutTargetLossAcrossSeeds) {
  ExperimentConfig cfg;
  const World world = build_world(cfg);
  Rng held_out(99);
  const Batch batch = target_task(cfg, world, 300).sample_query(held_out);
  const auto& episodes = std::get<EpisodeBatch>(batch);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ParameterVector theta = pretrain(cfg, world, seed).theta;
    const ParameterVector adapted = adapt(cfg, world, theta, Algorithm::kLeap, seed).theta;
    const double before = embedding_batch_loss(cfg.model, theta, episodes).item();
    const double after = embedding_batch_loss(cfg.model, adapted, episodes).item();
    EXPECT_LT(after, before) << "seed " << seed;
  }
}

TEST(AdaptOov, LeapReducesPathLengthOnNoiseFreeTasks) {
  const MlpConfig m = small_mlp();
  Rng rng(31);
  const ParameterVector theta = random_mlp_params(m, rng);
  const Task a = fixed_mlp_task(m, 41, "source");
  const Task b = fixed_mlp_task(m, 42, "target");
  const MetaConfig cfg = config(Algorithm::kLeap, 0.05, 10, 0.01);
  std::vector<double> totals;
  adapt_oov(theta, a, b, cfg, 10, Rng(1), [&](std::size_t, const MetaStepResult& r) {
    totals.push_back(r.task_objectives[0] + r.task_objectives[1]);
  });
  int increases = 0;
  for (std::size_t i = 1; i < totals.size(); ++i) increases += totals[i] > totals[i - 1];
  EXPECT_LE(increases, 1);
  EXPECT_LT(totals.back(), totals.front());
}
