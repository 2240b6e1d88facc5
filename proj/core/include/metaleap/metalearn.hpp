#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "metaleap/episode.hpp"
#include "metaleap/parameters.hpp"
#include "metaleap/rng.hpp"

namespace metaleap {

/// Supervised regression examples, one per row.
struct RegressionBatch {
  Array inputs{Shape{0, 0}};
  Array targets{Shape{0, 0}};
};

using EpisodeBatch = std::vector<Episode>;
using Batch = std::variant<RegressionBatch, EpisodeBatch>;

/// A task: a sampler of support/query batches plus its loss.
struct Task {
  std::string id;
  std::function<Batch(Rng&)> sample_support;
  std::function<Batch(Rng&)> sample_query;
  std::function<Var(const ParameterVector&, const Batch&)> loss;
};

enum class Algorithm { kMaml, kFomaml, kLeap };

Algorithm parse_algorithm(const std::string& name);
std::string to_string(Algorithm a);

struct MetaConfig {
  double alpha = 5e-4;
  double beta = 1e-4;
  std::size_t inner_steps = 64;
  std::size_t meta_batch = 2;
  Algorithm algorithm = Algorithm::kLeap;
  double epsilon_norm = 1e-12;
  /// Max-norm clip applied to the meta-gradient; 0 disables it.
  double clip_norm = 0.0;

  void validate() const;

  /// Defaults used for the embedding adaptation experiments, per algorithm.
  static MetaConfig defaults_for(Algorithm algorithm);
};

struct TrajectoryPoint {
  ParameterVector theta;
  double loss_value = 0.0;
};

/// K inner steps from one initialization: K+1 points, the batch each point's
/// loss was measured on, and the gradient taken at each of the first K points.
struct Trajectory {
  std::string task_id;
  std::vector<TrajectoryPoint> points;
  std::vector<Batch> batches;
  std::vector<ParameterVector> gradients;

  std::size_t steps() const noexcept { return points.empty() ? 0 : points.size() - 1; }
};

/// Running meta-gradient of the pull-forward objective.
struct LeapAccumulator {
  ParameterVector grad;
  std::size_t tasks_seen = 0;

  explicit LeapAccumulator(const ParameterVector& layout)
      : grad(ParameterVector::zeros_like(layout)) {}
  void add(const ParameterVector& increment);
};

/// theta - alpha * grad L(theta; batch). With `create_graph` the result stays
/// differentiable w.r.t. `theta` (second-order MAML); otherwise it is detached.
ParameterVector inner_update(const ParameterVector& theta, const Task& task, const Batch& batch,
                             double alpha, bool create_graph = false, std::size_t step = 0);

/// Runs cfg.inner_steps plain SGD steps on fresh support batches.
Trajectory run_trajectory(const ParameterVector& theta0, const Task& task, const MetaConfig& cfg,
                          Rng& rng);

/// Rng stream a task draws its batches from within one meta-step; keyed by the
/// task id so identical tasks see identical batches.
Rng task_stream(const Rng& step_rng, const Task& task);

struct MetaGradient {
  ParameterVector gradient;
  /// Per task: query loss after adaptation (MAML/FOMAML) or pull-forward
  /// distance of its trajectory (Leap).
  std::vector<double> task_objectives;
};

/// Exact gradient of sum_T L_T(u_T^K(theta)) on query batches.
MetaGradient maml_meta_gradient(const ParameterVector& theta, const std::vector<Task>& tasks,
                                const MetaConfig& cfg, const Rng& rng);

/// Sum over tasks of the query gradient at the adapted parameters, inner
/// updates treated as constants.
MetaGradient fomaml_meta_gradient(const ParameterVector& theta, const std::vector<Task>& tasks,
                                  const MetaConfig& cfg, const Rng& rng);

/// Length of the polyline through (theta^i, L^i).
double cumulative_chordal_distance(const Trajectory& trajectory);

/// sum_i |(psi^{i+1}, L(psi^{i+1})) - (theta^i, L(theta^i))|, mixing the
/// baseline's next points with the current trajectory's points.
double pull_forward_distance(const Trajectory& current, const Trajectory& baseline);

/// Gradient of one frozen-target pull-forward segment w.r.t. theta^i.
ParameterVector leap_increment(const TrajectoryPoint& current, const TrajectoryPoint& target_next,
                               const ParameterVector& grad_at_current, double eps);

struct LeapStep {
  ParameterVector theta;
  LeapAccumulator accumulator;
  /// Pull-forward distance per task (baseline = the trajectory itself).
  std::vector<double> task_distances;
};

/// One Leap meta-update: theta - beta / |B| * grad F.
LeapStep leap_meta_step(const ParameterVector& theta, const std::vector<Task>& tasks,
                        const MetaConfig& cfg, const Rng& rng);

/// Any of the three meta-updates; MAML/FOMAML use theta - beta * grad.
struct MetaStepResult {
  ParameterVector theta;
  std::vector<double> task_objectives;
  double gradient_norm = 0.0;
};
MetaStepResult meta_step(const ParameterVector& theta, const std::vector<Task>& tasks,
                         const MetaConfig& cfg, const Rng& rng);

using MetaLogFn = std::function<void(std::size_t iteration, const MetaStepResult&)>;

/// Repeated meta-steps over a fixed batch of tasks, iteration i drawing from
/// rng.split(i).
ParameterVector meta_train_fixed(const ParameterVector& theta, const std::vector<Task>& tasks,
                                 const MetaConfig& cfg, std::size_t iterations, const Rng& rng,
                                 const MetaLogFn& log = {});

/// Repeated meta-steps, each over cfg.meta_batch freshly sampled tasks.
using TaskSampler = std::function<Task(Rng&)>;
ParameterVector meta_train(const ParameterVector& theta, const TaskSampler& sampler,
                           const MetaConfig& cfg, std::size_t iterations, const Rng& rng,
                           const MetaLogFn& log = {});

/// Adapts pre-trained parameters to a new corpus by meta-training over the
/// two-task batch {source corpus, target corpus}.
ParameterVector adapt_oov(const ParameterVector& theta_source, const Task& source_task,
                          const Task& target_task, const MetaConfig& cfg, std::size_t meta_iters,
                          const Rng& rng, const MetaLogFn& log = {});

}  // namespace metaleap
