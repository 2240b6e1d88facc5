#include "metaleap/metalearn.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "metaleap/error.hpp"

namespace metaleap {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct LossAndGradient {
  double loss;
  ParameterVector grad;
};

LossAndGradient loss_and_gradient(const ParameterVector& theta, const Task& task,
                                  const Batch& batch, std::size_t step) {
  RecordGuard record;
  const ParameterVector leaves = theta.as_leaves();
  const Var loss = task.loss(leaves, batch);
  ParameterVector grad = gradient(loss, leaves, false);
  if (!std::isfinite(loss.item()) || !grad.all_finite()) {
    throw NumericError("non-finite gradient in task '" + task.id + "' at step " +
                       std::to_string(step));
  }
  return {loss.item(), std::move(grad)};
}

double squared_distance(const ParameterVector& a, const ParameterVector& b) {
  if (!a.same_layout(b)) throw ShapeError("trajectory points have different layouts");
  double total = 0.0;
  for (std::size_t s = 0; s < a.num_segments(); ++s) {
    const auto x = a.var(s).value().data();
    const auto y = b.var(s).value().data();
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = x[j] - y[j];
      total += d * d;
    }
  }
  return total;
}

double segment_length(const TrajectoryPoint& from, const TrajectoryPoint& to) {
  const double dl = to.loss_value - from.loss_value;
  return std::sqrt(squared_distance(from.theta, to.theta) + dl * dl);
}

ParameterVector clip(const ParameterVector& g, double max_norm, double* norm_out) {
  const double norm = l2_norm(g);
  if (norm_out) *norm_out = norm;
  if (max_norm <= 0.0 || norm <= max_norm) return g;
  NoRecordGuard no_record;
  return scale(g, max_norm / norm);
}

void require_algorithm(const MetaConfig& cfg, Algorithm expected, const char* fn) {
  cfg.validate();
  if (cfg.algorithm != expected) {
    throw ValidationError(std::string(fn) + " requires algorithm " + to_string(expected) +
                          ", config has " + to_string(cfg.algorithm));
  }
}

MetaGradient unrolled_meta_gradient(const ParameterVector& theta, const std::vector<Task>& tasks,
                                    const MetaConfig& cfg, const Rng& rng, bool second_order) {
  if (tasks.empty()) throw ValidationError("meta-gradient over an empty task batch");
  RecordGuard record;
  MetaGradient out{ParameterVector::zeros_like(theta), {}};
  for (const Task& task : tasks) {
    Rng r = task_stream(rng, task);
    const ParameterVector start = theta.as_leaves();
    ParameterVector adapted = second_order ? start : theta.detached();
    for (std::size_t k = 0; k < cfg.inner_steps; ++k) {
      const Batch batch = task.sample_support(r);
      adapted = inner_update(adapted, task, batch, cfg.alpha, second_order, k);
    }
    const Batch query = task.sample_query(r);
    const ParameterVector wrt = second_order ? start : adapted.as_leaves();
    const Var loss = task.loss(second_order ? adapted : wrt, query);
    ParameterVector g = gradient(loss, wrt, false);
    if (!std::isfinite(loss.item()) || !g.all_finite()) {
      throw NumericError("non-finite meta-gradient for task '" + task.id + "'");
    }
    NoRecordGuard no_record;
    out.gradient = add(out.gradient, g);
    out.task_objectives.push_back(loss.item());
  }
  return out;
}

}  // namespace

Algorithm parse_algorithm(const std::string& name) {
  if (name == "maml") return Algorithm::kMaml;
  if (name == "fomaml") return Algorithm::kFomaml;
  if (name == "leap") return Algorithm::kLeap;
  throw ValidationError("unknown algorithm '" + name + "' (expected maml, fomaml or leap)");
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kMaml: return "maml";
    case Algorithm::kFomaml: return "fomaml";
    case Algorithm::kLeap: return "leap";
  }
  return "?";
}

void MetaConfig::validate() const {
  if (!(alpha > 0.0)) throw ValidationError("alpha must be > 0");
  if (!(beta > 0.0)) throw ValidationError("beta must be > 0");
  if (inner_steps < 1) throw ValidationError("inner_steps (K) must be >= 1");
  if (meta_batch < 1) throw ValidationError("meta_batch must be >= 1");
  if (!(epsilon_norm > 0.0)) throw ValidationError("epsilon_norm must be > 0");
  if (clip_norm < 0.0) throw ValidationError("clip_norm must be >= 0");
}

MetaConfig MetaConfig::defaults_for(Algorithm algorithm) {
  MetaConfig c;
  c.algorithm = algorithm;
  c.alpha = 5e-4;
  c.meta_batch = 2;
  if (algorithm == Algorithm::kLeap) {
    c.beta = 1e-4;
    c.inner_steps = 64;
  } else {
    c.beta = 1e-5;
    c.inner_steps = 4;
  }
  return c;
}

void LeapAccumulator::add(const ParameterVector& increment) {
  NoRecordGuard no_record;
  grad = metaleap::add(grad, increment);
  ++tasks_seen;
}

ParameterVector inner_update(const ParameterVector& theta, const Task& task, const Batch& batch,
                             double alpha, bool create_graph, std::size_t step) {
  if (!(alpha > 0.0)) throw ValidationError("inner step size alpha must be > 0");
  if (!create_graph) {
    LossAndGradient lg = loss_and_gradient(theta, task, batch, step);
    NoRecordGuard no_record;
    return axpy(theta.detached(), -alpha, lg.grad);
  }
  RecordGuard record;
  const Var loss = task.loss(theta, batch);
  const ParameterVector grad = gradient(loss, theta, true);
  if (!std::isfinite(loss.item()) || !grad.all_finite()) {
    throw NumericError("non-finite gradient in task '" + task.id + "' at step " +
                       std::to_string(step));
  }
  return axpy(theta, -alpha, grad);
}

Trajectory run_trajectory(const ParameterVector& theta0, const Task& task, const MetaConfig& cfg,
                          Rng& rng) {
  cfg.validate();
  Trajectory traj;
  traj.task_id = task.id;
  traj.points.reserve(cfg.inner_steps + 1);
  ParameterVector theta = theta0.detached();
  for (std::size_t i = 0; i < cfg.inner_steps; ++i) {
    Batch batch = task.sample_support(rng);
    LossAndGradient lg = loss_and_gradient(theta, task, batch, i);
    ParameterVector next;
    {
      NoRecordGuard no_record;
      next = axpy(theta, -cfg.alpha, lg.grad);
    }
    traj.points.push_back({std::move(theta), lg.loss});
    traj.batches.push_back(std::move(batch));
    traj.gradients.push_back(std::move(lg.grad));
    theta = std::move(next);
  }
  Batch final_batch = task.sample_support(rng);
  double final_loss;
  {
    NoRecordGuard no_record;
    final_loss = task.loss(theta, final_batch).item();
  }
  if (!std::isfinite(final_loss)) {
    throw NumericError("non-finite loss in task '" + task.id + "' at step " +
                       std::to_string(cfg.inner_steps));
  }
  traj.points.push_back({std::move(theta), final_loss});
  traj.batches.push_back(std::move(final_batch));
  return traj;
}

Rng task_stream(const Rng& step_rng, const Task& task) { return step_rng.split(fnv1a(task.id)); }

MetaGradient maml_meta_gradient(const ParameterVector& theta, const std::vector<Task>& tasks,
                                const MetaConfig& cfg, const Rng& rng) {
  require_algorithm(cfg, Algorithm::kMaml, "maml_meta_gradient");
  return unrolled_meta_gradient(theta, tasks, cfg, rng, true);
}

MetaGradient fomaml_meta_gradient(const ParameterVector& theta, const std::vector<Task>& tasks,
                                  const MetaConfig& cfg, const Rng& rng) {
  require_algorithm(cfg, Algorithm::kFomaml, "fomaml_meta_gradient");
  return unrolled_meta_gradient(theta, tasks, cfg, rng, false);
}

double cumulative_chordal_distance(const Trajectory& trajectory) {
  if (trajectory.points.empty()) throw ValidationError("empty trajectory");
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < trajectory.points.size(); ++i) {
    total += segment_length(trajectory.points[i], trajectory.points[i + 1]);
  }
  return total;
}

double pull_forward_distance(const Trajectory& current, const Trajectory& baseline) {
  if (current.points.size() != baseline.points.size()) {
    throw ValidationError("pull-forward distance: trajectory lengths differ (" +
                          std::to_string(current.points.size()) + " vs " +
                          std::to_string(baseline.points.size()) + ")");
  }
  if (current.points.empty()) throw ValidationError("empty trajectory");
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < current.points.size(); ++i) {
    total += segment_length(current.points[i], baseline.points[i + 1]);
  }
  return total;
}

ParameterVector leap_increment(const TrajectoryPoint& current, const TrajectoryPoint& target_next,
                               const ParameterVector& grad_at_current, double eps) {
  if (!(eps > 0.0)) throw ValidationError("epsilon_norm must be > 0");
  if (!current.theta.same_layout(target_next.theta) ||
      !current.theta.same_layout(grad_at_current)) {
    throw ShapeError("leap_increment: parameter layouts differ");
  }
  const double loss_gap = current.loss_value - target_next.loss_value;
  const double denom = std::max(segment_length(current, target_next), eps);
  NoRecordGuard no_record;
  ParameterVector numerator = axpy(sub(current.theta, target_next.theta), loss_gap, grad_at_current);
  return scale(numerator, 1.0 / denom);
}

LeapStep leap_meta_step(const ParameterVector& theta, const std::vector<Task>& tasks,
                        const MetaConfig& cfg, const Rng& rng) {
  require_algorithm(cfg, Algorithm::kLeap, "leap_meta_step");
  if (tasks.empty()) throw ValidationError("meta-step over an empty task batch");
  LeapStep out{ParameterVector{}, LeapAccumulator(theta), {}};
  for (const Task& task : tasks) {
    Rng r = task_stream(rng, task);
    const Trajectory traj = run_trajectory(theta, task, cfg, r);
    // The baseline follows the same points; its next point is a frozen target.
    ParameterVector task_sum = ParameterVector::zeros_like(theta);
    for (std::size_t i = 0; i < traj.steps(); ++i) {
      NoRecordGuard no_record;
      task_sum = add(task_sum, leap_increment(traj.points[i], traj.points[i + 1],
                                              traj.gradients[i], cfg.epsilon_norm));
    }
    out.accumulator.add(task_sum);
    out.task_distances.push_back(pull_forward_distance(traj, traj));
  }
  double norm = 0.0;
  const ParameterVector step = clip(out.accumulator.grad, cfg.clip_norm, &norm);
  NoRecordGuard no_record;
  out.theta = axpy(theta.detached(), -cfg.beta / static_cast<double>(tasks.size()), step);
  return out;
}

MetaStepResult meta_step(const ParameterVector& theta, const std::vector<Task>& tasks,
                         const MetaConfig& cfg, const Rng& rng) {
  MetaStepResult result;
  if (cfg.algorithm == Algorithm::kLeap) {
    LeapStep step = leap_meta_step(theta, tasks, cfg, rng);
    result.gradient_norm = l2_norm(step.accumulator.grad);
    result.theta = std::move(step.theta);
    result.task_objectives = std::move(step.task_distances);
    return result;
  }
  MetaGradient mg = cfg.algorithm == Algorithm::kMaml ? maml_meta_gradient(theta, tasks, cfg, rng)
                                                      : fomaml_meta_gradient(theta, tasks, cfg, rng);
  const ParameterVector g = clip(mg.gradient, cfg.clip_norm, &result.gradient_norm);
  NoRecordGuard no_record;
  result.theta = axpy(theta.detached(), -cfg.beta, g);
  result.task_objectives = std::move(mg.task_objectives);
  return result;
}

ParameterVector meta_train_fixed(const ParameterVector& theta, const std::vector<Task>& tasks,
                                 const MetaConfig& cfg, std::size_t iterations, const Rng& rng,
                                 const MetaLogFn& log) {
  ParameterVector current = theta.detached();
  for (std::size_t it = 0; it < iterations; ++it) {
    MetaStepResult step = meta_step(current, tasks, cfg, rng.split(it));
    if (!step.theta.all_finite()) {
      throw NumericError("meta-parameters became non-finite at iteration " + std::to_string(it));
    }
    if (log) log(it, step);
    current = std::move(step.theta);
  }
  return current;
}

ParameterVector meta_train(const ParameterVector& theta, const TaskSampler& sampler,
                           const MetaConfig& cfg, std::size_t iterations, const Rng& rng,
                           const MetaLogFn& log) {
  cfg.validate();
  ParameterVector current = theta.detached();
  for (std::size_t it = 0; it < iterations; ++it) {
    const Rng step_rng = rng.split(it);
    Rng task_rng = step_rng.split(0x7461736b73ULL);
    std::vector<Task> tasks;
    tasks.reserve(cfg.meta_batch);
    for (std::size_t j = 0; j < cfg.meta_batch; ++j) {
      Task t = sampler(task_rng);
      t.id += "/" + std::to_string(it) + "." + std::to_string(j);
      tasks.push_back(std::move(t));
    }
    MetaStepResult step = meta_step(current, tasks, cfg, step_rng);
    if (!step.theta.all_finite()) {
      throw NumericError("meta-parameters became non-finite at iteration " + std::to_string(it));
    }
    if (log) log(it, step);
    current = std::move(step.theta);
  }
  return current;
}

ParameterVector adapt_oov(const ParameterVector& theta_source, const Task& source_task,
                          const Task& target_task, const MetaConfig& cfg, std::size_t meta_iters,
                          const Rng& rng, const MetaLogFn& log) {
  cfg.validate();
  if (meta_iters < 1) throw ValidationError("meta_iters must be >= 1");
  return meta_train_fixed(theta_source, {source_task, target_task}, cfg, meta_iters, rng, log);
}

}  // namespace metaleap
