#include "metaleap/selftest.hpp"

#include <algorithm>
#include <cmath>

#include "metaleap/gradcheck.hpp"
#include "metaleap/model.hpp"
#include "metaleap/rng.hpp"

namespace metaleap {

namespace {

Array random_array(Rng& rng, Shape shape, double sd) {
  Array a(std::move(shape));
  for (double& x : a.data()) x = rng.normal(0.0, sd);
  return a;
}

ParameterVector randomized(const ParameterVector& layout, Rng& rng, double sd) {
  std::vector<double> flat(layout.total_dim());
  for (double& x : flat) x = rng.normal(0.0, sd);
  return ParameterVector::unflatten(layout, flat);
}

Task fixed_regression_task(const MlpConfig& model, Rng& rng, std::size_t points, std::string id) {
  auto make_batch = [&] {
    return RegressionBatch{random_array(rng, {points, model.input_dim}, 1.0),
                           random_array(rng, {points, model.output_dim}, 1.0)};
  };
  const RegressionBatch support = make_batch();
  const RegressionBatch query = make_batch();
  Task t;
  t.id = std::move(id);
  t.sample_support = [support](Rng&) -> Batch { return support; };
  t.sample_query = [query](Rng&) -> Batch { return query; };
  t.loss = [model](const ParameterVector& theta, const Batch& b) {
    const auto& rb = std::get<RegressionBatch>(b);
    return mse_loss(model, theta, rb.inputs, rb.targets);
  };
  return t;
}

double check(const ScalarObjective& f, const ParameterVector& theta,
             const std::vector<double>& analytic, double step) {
  return max_relative_error(analytic, central_difference_gradient(f, theta, step));
}

}  // namespace

Task quadratic_task(std::string id) {
  Task t;
  t.id = std::move(id);
  t.sample_support = [](Rng&) -> Batch { return RegressionBatch{}; };
  t.sample_query = t.sample_support;
  t.loss = [](const ParameterVector& theta, const Batch&) {
    Var total = Var::constant(Array::scalar(0.0));
    for (const Var& v : theta.vars()) total = total + ops::sum(ops::square(v));
    return 0.5 * total;
  };
  return t;
}

ParameterVector scalar_theta(double value) {
  ParameterVector p;
  p.add("theta", Array::vector({value}));
  return p;
}

GradientCase random_mlp_case(std::uint64_t seed, std::size_t index) {
  Rng rng = Rng(seed).split(index);
  MlpConfig m;
  m.input_dim = 1 + index % 3;
  m.hidden_dim = 4 + index % 5;
  m.output_dim = 1 + index % 2;
  m.hidden_layers = 1 + index % 2;
  m.activation = Activation::kTanh;
  const std::size_t points = 3 + index % 4;
  const Array x = random_array(rng, {points, m.input_dim}, 1.0);
  const Array y = random_array(rng, {points, m.output_dim}, 1.0);
  GradientCase c;
  c.name = "mlp-" + std::to_string(index);
  c.theta = randomized(init_params(m, rng.next_u64()), rng, 0.7);
  c.loss = [m, x, y](const ParameterVector& theta) { return mse_loss(m, theta, x, y); };
  return c;
}

GradientCase random_regressor_case(std::uint64_t seed, std::size_t index) {
  Rng rng = Rng(seed).split(index);
  RegressorConfig r;
  r.embedding_dim = 4;
  r.hidden_dim = 6;
  r.aggregator = index % 2 == 0 ? Aggregator::kMean : Aggregator::kAttention;
  r.activation = Activation::kTanh;
  Episode ep;
  ep.contexts = ContextSet(random_array(rng, {3, r.embedding_dim}, 1.0));
  ep.target = random_array(rng, {r.embedding_dim}, 1.0);
  GradientCase c;
  c.name = "regressor-" + to_string(r.aggregator) + "-" + std::to_string(index);
  c.theta = init_params(r, rng.next_u64());
  c.loss = [r, ep](const ParameterVector& theta) { return embedding_loss(r, theta, ep); };
  return c;
}

double normwise_gradient_error(const GradientCase& c, double step) {
  const ParameterVector leaves = c.theta.as_leaves();
  const std::vector<double> a = gradient(c.loss(leaves), leaves).flatten();
  const std::vector<double> n = central_difference_gradient(c.loss, c.theta, step);
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    norm += n[i] * n[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

double maml_finite_difference_error(std::uint64_t seed, std::size_t inner_steps) {
  Rng rng(seed);
  MlpConfig m;
  m.input_dim = 1;
  m.hidden_dim = 6;
  m.output_dim = 1;
  m.hidden_layers = 2;
  m.activation = Activation::kTanh;
  const std::vector<Task> tasks{fixed_regression_task(m, rng, 5, "a"),
                                fixed_regression_task(m, rng, 5, "b")};
  const ParameterVector theta = randomized(init_params(m, rng.next_u64()), rng, 0.5);
  MetaConfig cfg;
  cfg.algorithm = Algorithm::kMaml;
  cfg.alpha = 0.05;
  cfg.inner_steps = inner_steps;
  const Rng step_rng = rng.split(99);
  const std::vector<double> analytic = maml_meta_gradient(theta, tasks, cfg, step_rng).gradient.flatten();
  MetaConfig first = cfg;
  first.algorithm = Algorithm::kFomaml;
  auto objective = [&](const ParameterVector& p) {
    double total = 0.0;
    for (double v : fomaml_meta_gradient(p, tasks, first, step_rng).task_objectives) total += v;
    return Var::constant(Array::scalar(total));
  };
  return check(objective, theta, analytic, 1e-5);
}

double leap_finite_difference_error(std::uint64_t seed, std::size_t inner_steps) {
  Rng rng(seed);
  MlpConfig m;
  m.input_dim = 1;
  m.hidden_dim = 6;
  m.output_dim = 1;
  m.hidden_layers = 2;
  m.activation = Activation::kTanh;
  const std::vector<Task> tasks{fixed_regression_task(m, rng, 5, "a"),
                                fixed_regression_task(m, rng, 5, "b")};
  const ParameterVector theta = randomized(init_params(m, rng.next_u64()), rng, 0.5);
  MetaConfig cfg;
  cfg.algorithm = Algorithm::kLeap;
  cfg.alpha = 0.1;
  cfg.beta = 1.0;
  cfg.inner_steps = inner_steps;
  const Rng step_rng = rng.split(99);
  const LeapStep step = leap_meta_step(theta, tasks, cfg, step_rng);
  const std::vector<double> analytic = step.accumulator.grad.flatten();

  // Every trajectory point moves with theta (identity Jacobian); the next
  // points of the baseline stay where they were.
  std::vector<Trajectory> trajectories;
  for (const Task& task : tasks) {
    Rng r = task_stream(step_rng, task);
    trajectories.push_back(run_trajectory(theta, task, cfg, r));
  }
  auto objective = [&](const ParameterVector& p) {
    const ParameterVector delta = sub(p, theta);
    double total = 0.0;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const Trajectory& traj = trajectories[t];
      for (std::size_t i = 0; i < traj.steps(); ++i) {
        const ParameterVector moved = add(traj.points[i].theta, delta);
        const double loss = tasks[t].loss(moved, traj.batches[i]).item();
        const ParameterVector diff = sub(traj.points[i + 1].theta, moved);
        const double dl = traj.points[i + 1].loss_value - loss;
        total += std::sqrt(dot(diff, diff) + dl * dl);
      }
    }
    return Var::constant(Array::scalar(total));
  };
  return check(objective, theta, analytic, 1e-6);
}

std::vector<SelftestCheck> run_selftest(std::size_t gradient_cases) {
  std::vector<SelftestCheck> out;

  double worst = 0.0;
  for (std::size_t i = 0; i < gradient_cases; ++i) {
    const GradientCase c = random_mlp_case(20240601, i);
    worst = std::max(worst, finite_difference_check(c.loss, c.theta, 1e-5));
  }
  out.push_back({"MLP gradients vs central differences (" + std::to_string(gradient_cases) +
                     " losses)",
                 worst, 1e-5});
  double regressor = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    regressor = std::max(regressor, normwise_gradient_error(random_regressor_case(7, i), 1e-5));
  }
  out.push_back({"regressor gradients vs central differences (norm-wise)", regressor, 1e-6});

  const Task quad = quadratic_task();
  const Rng rng(1);
  MetaConfig maml;
  maml.algorithm = Algorithm::kMaml;
  maml.alpha = 0.1;
  for (std::size_t k : {1u, 2u}) {
    maml.inner_steps = k;
    const double g = maml_meta_gradient(scalar_theta(1.0), {quad}, maml, rng).gradient.flatten()[0];
    const double expected = std::pow(0.9, 2.0 * static_cast<double>(k));
    out.push_back({"maml quadratic K=" + std::to_string(k), std::abs(g - expected), 1e-12});
  }
  MetaConfig fo = maml;
  fo.algorithm = Algorithm::kFomaml;
  fo.inner_steps = 1;
  out.push_back({"fomaml quadratic K=1",
                 std::abs(fomaml_meta_gradient(scalar_theta(1.0), {quad}, fo, rng).gradient.flatten()[0] - 0.9),
                 1e-12});

  double maml_fd = 0.0;
  for (std::size_t k = 1; k <= 4; ++k) maml_fd = std::max(maml_fd, maml_finite_difference_error(k, k));
  out.push_back({"maml meta-gradient vs central differences (K<=4)", maml_fd, 1e-4});

  const TrajectoryPoint here{scalar_theta(1.0), 0.5};
  const TrajectoryPoint next{scalar_theta(0.9), 0.405};
  const double inc = leap_increment(here, next, scalar_theta(1.0), 1e-12).flatten()[0];
  out.push_back({"leap increment hand instance", std::abs(inc - 1.41375), 1e-5});
  MetaConfig leap;
  leap.algorithm = Algorithm::kLeap;
  leap.alpha = 0.1;
  leap.beta = 0.1;
  leap.inner_steps = 1;
  const double stepped = leap_meta_step(scalar_theta(1.0), {quad}, leap, rng).theta.flatten()[0];
  out.push_back({"leap meta-step hand instance", std::abs(stepped - 0.858625), 1e-5});

  double leap_fd = 0.0;
  for (std::size_t k = 1; k <= 4; ++k) leap_fd = std::max(leap_fd, leap_finite_difference_error(10 + k, k));
  out.push_back({"leap gradient vs central differences", leap_fd, 1e-4});

  Trajectory hand;
  hand.points = {{scalar_theta(0.0), 1.0}, {scalar_theta(3.0), 5.0}};
  out.push_back({"chordal distance hand instance", std::abs(cumulative_chordal_distance(hand) - 5.0),
                 1e-12});
  return out;
}

}  // namespace metaleap
