#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metaleap/config.hpp"
#include "metaleap/eval.hpp"
#include "metaleap/metalearn.hpp"
#include "metaleap/taskgen.hpp"

namespace metaleap {

/// The source corpus the regressor is pre-trained on and the shifted corpus
/// it is adapted to. Both depend only on the config, not on the run seed.
struct World {
  SyntheticCorpus source;
  SyntheticCorpus target;
};

World build_world(const ExperimentConfig& config);

/// Episodes of any source word.
Task source_task(const ExperimentConfig& config, const World& world, std::size_t batch_size);
/// Episodes of the target corpus words that survived the shift.
Task target_task(const ExperimentConfig& config, const World& world, std::size_t batch_size);

/// Chimera benchmark with K = k, pivots drawn from the target's novel words.
std::vector<ChimeraEpisode> chimera_benchmark(const ExperimentConfig& config, const World& world,
                                              std::size_t k);

struct CurvePoint {
  std::size_t iteration = 0;
  double loss = 0.0;
};

struct PretrainResult {
  ParameterVector theta;
  std::vector<CurvePoint> curve;
};

/// Plain minibatch SGD on source episodes. A non-finite loss raises NumericError.
PretrainResult pretrain(const ExperimentConfig& config, const World& world, std::uint64_t seed);

struct AdaptLogRow {
  std::size_t iteration = 0;
  std::string task;
  double objective = 0.0;
  double gradient_norm = 0.0;
};

struct AdaptResult {
  ParameterVector theta;
  std::vector<AdaptLogRow> log;
};

/// adapt_oov over {source, target}; std::nullopt leaves theta untouched.
AdaptResult adapt(const ExperimentConfig& config, const World& world, const ParameterVector& theta,
                  std::optional<Algorithm> algorithm, std::uint64_t seed);

/// "none" maps to std::nullopt; anything else goes through parse_algorithm.
std::optional<Algorithm> parse_adapt_algorithm(const std::string& name);
/// Label used in result files: "plain" for no adaptation.
std::string method_label(std::optional<Algorithm> algorithm);

struct Analysis {
  struct Row {
    std::string scope;
    std::string metric;
    double value = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
    std::size_t n = 0;
  };
  std::vector<Row> rows;
  struct PairRow {
    std::string scope;
    RankingAgreement::Pair pair;
  };
  std::vector<PairRow> pairs;

  const Row* find(const std::string& scope, const std::string& metric) const;
};

/// Ranking agreement and informativeness correlation per K and over all K
/// pooled (scope "all"). `informativeness` maps k -> episode id -> value; an
/// empty map skips the informativeness rows.
Analysis analyze_results(const std::vector<EvalResult>& results,
                         const std::map<std::size_t, std::map<std::string, double>>& informativeness,
                         const AnalyzeSettings& settings);

// CSV emission. Every file starts with a header row.
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);
void write_adapt_log_csv(std::ostream& out, const std::vector<AdaptLogRow>& log);
void write_episode_csv(std::ostream& out, const std::vector<EvalResult>& results);
/// One row per (method, k): mean and sample std of the per-seed means, with
/// mean +- 1.96 std / sqrt(seeds).
void write_summary_csv(std::ostream& out, const std::vector<EvalResult>& results);
void write_analysis_csv(std::ostream& out, const Analysis& analysis);
void write_pairs_csv(std::ostream& out, const Analysis& analysis);

/// Parses files written by write_episode_csv back into per-(method, seed, k)
/// results.
std::vector<EvalResult> read_episode_csv(std::istream& in);

// ---------------------------------------------------------------------------
// Sinusoid few-shot regression

struct SinusoidSettings {
  MlpConfig model{};
  std::size_t meta_iters = 2000;
  std::size_t points = 10;
  std::size_t meta_batch = 5;
  MetaConfig maml{.alpha = 0.01, .beta = 3e-3, .inner_steps = 1, .meta_batch = 5,
                  .algorithm = Algorithm::kMaml};
  MetaConfig leap{.alpha = 0.01, .beta = 0.01, .inner_steps = 10, .meta_batch = 5,
                  .algorithm = Algorithm::kLeap};
  std::size_t eval_tasks = 100;
  std::size_t eval_steps = 10;
  double eval_lr = 0.01;
  std::size_t eval_query_points = 100;
};

struct SinusoidOutcome {
  double random_init_mse = 0.0;
  double maml_mse = 0.0;
  double leap_mse = 0.0;
};

/// Mean post-adaptation MSE over held-out tasks: eval_steps SGD steps on
/// `points` support points, then MSE on fresh query points.
double sinusoid_adapted_mse(const SinusoidSettings& settings, const ParameterVector& theta,
                            std::uint64_t eval_seed);

SinusoidOutcome run_sinusoid_experiment(const SinusoidSettings& settings, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Commands

/// Replaces `{seed}` in a path pattern.
std::string expand_seed(const std::string& pattern, std::uint64_t seed);

std::string default_pretrain_checkpoint(const ExperimentConfig& config);
std::string default_method_checkpoint(const ExperimentConfig& config, const std::string& method);

/// For each seed: pre-train, write `pretrain_seed{seed}.mlcp` and
/// `pretrain_curve_seed{seed}.csv` under output_dir.
void cmd_pretrain(const ExperimentConfig& config, std::ostream& log);

/// For each seed: load `checkpoint` (with `{seed}` expanded), adapt, write
/// `<method>_seed{seed}.mlcp` and `adapt_log_<method>_seed{seed}.csv`.
void cmd_adapt(const ExperimentConfig& config, const std::string& checkpoint,
               const std::string& algorithm, std::ostream& log);

/// For each seed and K: score the checkpoint on the benchmark (or on the
/// ingested `episodes_path` when non-empty); writes `eval_<method>.csv` and
/// `summary_<method>.csv`.
void cmd_eval(const ExperimentConfig& config, const std::string& checkpoint,
              const std::string& method, const std::string& episodes_path, std::ostream& log);

/// Reads per-episode CSVs and writes `analysis.csv` and `ranking_pairs.csv`.
void cmd_analyze(const ExperimentConfig& config, const std::vector<std::string>& inputs,
                 const std::string& episodes_path, std::ostream& log);

/// pretrain, adapt with each of none/maml/leap, eval each, analyze.
void run_pipeline(const ExperimentConfig& config, std::ostream& log);

}  // namespace metaleap
