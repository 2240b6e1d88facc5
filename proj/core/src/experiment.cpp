#include "metaleap/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "metaleap/checkpoint.hpp"
#include "metaleap/episode_io.hpp"
#include "metaleap/error.hpp"

namespace metaleap {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kPretrainStream = 0x70726574;
constexpr std::uint64_t kAdaptStream = 0x61646170;

std::string fmt(double v) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

std::vector<std::size_t> all_words(const SyntheticCorpus& c) {
  std::vector<std::size_t> w(c.vocab_size());
  std::iota(w.begin(), w.end(), std::size_t{0});
  return w;
}

EpisodeSamplerOptions sampler_options(const ExperimentConfig& config, std::size_t batch_size) {
  EpisodeSamplerOptions o;
  o.batch_size = batch_size;
  o.k_choices = config.eval.k_shots;
  return o;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string pooled_id(std::size_t k, const std::string& id) {
  return "k" + std::to_string(k) + ":" + id;
}

}  // namespace

World build_world(const ExperimentConfig& config) {
  World w;
  w.source = build_synthetic_corpus(config.corpus, config.corpus_seed);
  w.target = derive_shifted_corpus(w.source, config.shift.strength, config.shift.seed,
                                   config.shift.resample_fraction);
  return w;
}

Task source_task(const ExperimentConfig& config, const World& world, std::size_t batch_size) {
  return make_corpus_task(world.source, all_words(world.source), config.model,
                          sampler_options(config, batch_size), "source");
}

Task target_task(const ExperimentConfig& config, const World& world, std::size_t batch_size) {
  return make_corpus_task(world.target, world.target.known_words(), config.model,
                          sampler_options(config, batch_size), "target");
}

std::vector<ChimeraEpisode> chimera_benchmark(const ExperimentConfig& config, const World& world,
                                              std::size_t k) {
  return make_chimera_benchmark(world.target, world.target.novel_words(), config.eval.episodes, k,
                                config.eval.seed);
}

PretrainResult pretrain(const ExperimentConfig& config, const World& world, std::uint64_t seed) {
  const Task task = source_task(config, world, config.pretrain.batch_size);
  const Rng rng = Rng(seed).split(kPretrainStream);
  PretrainResult out;
  ParameterVector theta = init_params(config.model, Rng(seed).split(kInitStream).next_u64());
  const std::size_t iters = config.pretrain.iterations;
  for (std::size_t t = 0; t < iters; ++t) {
    Rng step_rng = rng.split(t);
    const Batch batch = task.sample_support(step_rng);
    const ParameterVector leaves = theta.as_leaves();
    const Var loss = task.loss(leaves, batch);
    if (!std::isfinite(loss.item())) {
      throw NumericError("pre-training diverged at iteration " + std::to_string(t));
    }
    if (t % config.pretrain.log_every == 0) out.curve.push_back({t, loss.item()});
    const ParameterVector g = gradient(loss, leaves);
    NoRecordGuard no_record;
    theta = axpy(theta, -config.pretrain.learning_rate, g);
  }
  {
    Rng final_rng = rng.split(iters);
    NoRecordGuard no_record;
    const double final_loss = task.loss(theta, task.sample_support(final_rng)).item();
    if (!std::isfinite(final_loss)) throw NumericError("pre-training diverged");
    out.curve.push_back({iters, final_loss});
  }
  out.theta = theta.detached();
  return out;
}

AdaptResult adapt(const ExperimentConfig& config, const World& world, const ParameterVector& theta,
                  std::optional<Algorithm> algorithm, std::uint64_t seed) {
  AdaptResult out;
  if (!algorithm) {
    out.theta = theta.detached();
    return out;
  }
  const MetaConfig& meta = config.meta_for(*algorithm);
  const Task source = source_task(config, world, config.adapt.batch_size);
  const Task target = target_task(config, world, config.adapt.batch_size);
  const std::vector<std::string> ids{source.id, target.id};
  auto log = [&](std::size_t it, const MetaStepResult& step) {
    for (std::size_t i = 0; i < step.task_objectives.size(); ++i) {
      out.log.push_back({it, ids.at(i), step.task_objectives[i], step.gradient_norm});
    }
  };
  out.theta = adapt_oov(theta, source, target, meta, config.adapt.meta_iters,
                        Rng(seed).split(kAdaptStream), log);
  return out;
}

std::optional<Algorithm> parse_adapt_algorithm(const std::string& name) {
  if (name == "none") return std::nullopt;
  return parse_algorithm(name);
}

std::string method_label(std::optional<Algorithm> algorithm) {
  return algorithm ? to_string(*algorithm) : std::string("plain");
}

const Analysis::Row* Analysis::find(const std::string& scope, const std::string& metric) const {
  for (const Row& r : rows) {
    if (r.scope == scope && r.metric == metric) return &r;
  }
  return nullptr;
}

Analysis analyze_results(const std::vector<EvalResult>& results,
                         const std::map<std::size_t, std::map<std::string, double>>& informativeness,
                         const AnalyzeSettings& settings) {
  if (results.size() < 2) throw ValidationError("analysis needs at least two result sets");
  std::map<std::size_t, std::vector<EvalResult>> by_k;
  for (const EvalResult& r : results) by_k[r.k_shot].push_back(r);

  std::vector<std::pair<std::string, std::vector<EvalResult>>> scopes;
  std::map<std::string, EvalResult> pooled;
  for (const auto& [k, rs] : by_k) {
    scopes.emplace_back("k" + std::to_string(k), rs);
    std::map<std::string, std::size_t> occurrences;
    for (const EvalResult& r : rs) {
      std::string key = r.method + "/" + std::to_string(r.seed);
      key += "#" + std::to_string(occurrences[key]++);
      EvalResult& p = pooled[key];
      p.method = r.method;
      p.seed = r.seed;
      for (const auto& e : r.per_episode) p.per_episode.push_back({pooled_id(k, e.episode_id), e.score});
    }
  }
  if (by_k.size() > 1) {
    std::vector<EvalResult> all;
    for (auto& [_, r] : pooled) all.push_back(std::move(r));
    scopes.emplace_back("all", std::move(all));
  }

  Analysis out;
  Rng rng(settings.seed);
  for (const auto& [scope, rs] : scopes) {
    if (rs.size() < 2) {
      throw ValidationError("analysis scope " + scope + " has fewer than two result sets");
    }
    const RankingAgreement agreement = rank_episodes(rs);
    out.rows.push_back({scope, "ranking_agreement", agreement.mean, agreement.summary.ci95_low(),
                        agreement.summary.ci95_high(), agreement.pairs.size()});
    for (const auto& p : agreement.pairs) out.pairs.push_back({scope, p});

    if (informativeness.empty()) continue;
    std::vector<double> info, score;
    for (const auto& e : rs.front().per_episode) {
      double inf = 0.0;
      bool found = false;
      if (scope == "all") {
        const auto colon = e.episode_id.find(':');
        const std::size_t k = std::stoul(e.episode_id.substr(1, colon - 1));
        const auto kit = informativeness.find(k);
        if (kit != informativeness.end()) {
          const auto it = kit->second.find(e.episode_id.substr(colon + 1));
          if (it != kit->second.end()) { inf = it->second; found = true; }
        }
      } else {
        const auto kit = informativeness.find(rs.front().k_shot);
        if (kit != informativeness.end()) {
          const auto it = kit->second.find(e.episode_id);
          if (it != kit->second.end()) { inf = it->second; found = true; }
        }
      }
      if (!found) throw ValidationError("no informativeness for episode '" + e.episode_id + "'");
      double mean = 0.0;
      for (const EvalResult& r : rs) {
        for (const auto& x : r.per_episode) {
          if (x.episode_id == e.episode_id) mean += x.score;
        }
      }
      info.push_back(inf);
      score.push_back(mean / static_cast<double>(rs.size()));
    }
    const BootstrapInterval ci = bootstrap_spearman(info, score, settings.bootstrap, rng);
    out.rows.push_back({scope, "informativeness_spearman", ci.estimate, ci.low, ci.high, info.size()});
  }
  return out;
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "iteration,loss\n";
  for (const auto& p : curve) out << p.iteration << ',' << fmt(p.loss) << '\n';
}

void write_adapt_log_csv(std::ostream& out, const std::vector<AdaptLogRow>& log) {
  out << "iteration,task,objective,gradient_norm\n";
  for (const auto& r : log) {
    out << r.iteration << ',' << r.task << ',' << fmt(r.objective) << ',' << fmt(r.gradient_norm)
        << '\n';
  }
}

void write_episode_csv(std::ostream& out, const std::vector<EvalResult>& results) {
  out << "episode_id,k_shot,method,seed,score\n";
  for (const EvalResult& r : results) {
    for (const auto& e : r.per_episode) {
      out << e.episode_id << ',' << r.k_shot << ',' << r.method << ',' << r.seed << ','
          << fmt(e.score) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& out, const std::vector<EvalResult>& results) {
  out << "method,k_shot,mean,std,ci95_low,ci95_high\n";
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> groups;
  std::vector<std::pair<std::string, std::size_t>> order;
  for (const EvalResult& r : results) {
    const auto key = std::make_pair(r.method, r.k_shot);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(r.mean_spearman);
  }
  for (const auto& key : order) {
    const Summary s = summarize(groups[key]);
    out << key.first << ',' << key.second << ',' << fmt(s.mean) << ',' << fmt(s.std) << ','
        << fmt(s.ci95_low()) << ',' << fmt(s.ci95_high()) << '\n';
  }
}

void write_analysis_csv(std::ostream& out, const Analysis& analysis) {
  out << "scope,metric,value,ci95_low,ci95_high,n\n";
  for (const auto& r : analysis.rows) {
    out << r.scope << ',' << r.metric << ',' << fmt(r.value) << ',' << fmt(r.ci95_low) << ','
        << fmt(r.ci95_high) << ',' << r.n << '\n';
  }
}

void write_pairs_csv(std::ostream& out, const Analysis& analysis) {
  out << "scope,run_a,run_b,spearman\n";
  for (const auto& p : analysis.pairs) {
    out << p.scope << ',' << p.pair.a << ',' << p.pair.b << ',' << fmt(p.pair.spearman) << '\n';
  }
}

std::vector<EvalResult> read_episode_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "episode_id,k_shot,method,seed,score") {
    throw ValidationError("per-episode CSV: unexpected header");
  }
  std::map<std::tuple<std::string, std::uint64_t, std::size_t>, EvalResult> groups;
  std::vector<std::tuple<std::string, std::uint64_t, std::size_t>> order;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 5) {
      throw ValidationError("per-episode CSV line " + std::to_string(lineno) + ": expected 5 columns");
    }
    std::size_t k = 0;
    std::uint64_t seed = 0;
    double score = 0.0;
    try {
      k = std::stoul(cells[1]);
      seed = std::stoull(cells[3]);
      score = std::stod(cells[4]);
    } catch (const std::exception&) {
      throw ValidationError("per-episode CSV line " + std::to_string(lineno) + ": bad number");
    }
    const auto key = std::make_tuple(cells[2], seed, k);
    if (!groups.count(key)) order.push_back(key);
    EvalResult& r = groups[key];
    r.method = cells[2];
    r.seed = seed;
    r.k_shot = k;
    r.per_episode.push_back({cells[0], score});
  }
  std::vector<EvalResult> out;
  for (const auto& key : order) {
    EvalResult r = std::move(groups[key]);
    double total = 0.0;
    for (const auto& e : r.per_episode) total += e.score;
    r.mean_spearman = total / static_cast<double>(r.per_episode.size());
    double ss = 0.0;
    for (const auto& e : r.per_episode) ss += (e.score - r.mean_spearman) * (e.score - r.mean_spearman);
    r.std = std::sqrt(ss / static_cast<double>(r.per_episode.size()));
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------

double sinusoid_adapted_mse(const SinusoidSettings& settings, const ParameterVector& theta,
                            std::uint64_t eval_seed) {
  Rng rng(eval_seed);
  double total = 0.0;
  for (std::size_t t = 0; t < settings.eval_tasks; ++t) {
    Rng task_rng = rng.split(t);
    const SinusoidTask task = sample_sinusoid_params(task_rng);
    const RegressionBatch support = task.sample_batch(task_rng, settings.points);
    const RegressionBatch query = task.sample_batch(task_rng, settings.eval_query_points);
    ParameterVector current = theta.detached();
    for (std::size_t s = 0; s < settings.eval_steps; ++s) {
      const ParameterVector leaves = current.as_leaves();
      const Var loss = mse_loss(settings.model, leaves, support.inputs, support.targets);
      const ParameterVector g = gradient(loss, leaves);
      NoRecordGuard no_record;
      current = axpy(current, -settings.eval_lr, g);
    }
    NoRecordGuard no_record;
    const double mse = mse_loss(settings.model, current, query.inputs, query.targets).item();
    if (!std::isfinite(mse)) throw NumericError("sinusoid evaluation produced a non-finite loss");
    total += mse;
  }
  return total / static_cast<double>(settings.eval_tasks);
}

SinusoidOutcome run_sinusoid_experiment(const SinusoidSettings& settings, std::uint64_t seed) {
  const Rng root(seed);
  const ParameterVector theta0 = init_params(settings.model, root.split(kInitStream).next_u64());
  const std::uint64_t eval_seed = root.split(0x6576616c).next_u64();
  auto sampler = [&](Rng& rng) { return sample_sinusoid_task(rng, settings.model, settings.points); };

  SinusoidOutcome out;
  out.random_init_mse = sinusoid_adapted_mse(settings, theta0, eval_seed);
  const ParameterVector maml =
      meta_train(theta0, sampler, settings.maml, settings.meta_iters, root.split(1));
  out.maml_mse = sinusoid_adapted_mse(settings, maml, eval_seed);
  const ParameterVector leap =
      meta_train(theta0, sampler, settings.leap, settings.meta_iters, root.split(2));
  out.leap_mse = sinusoid_adapted_mse(settings, leap, eval_seed);
  return out;
}

// ---------------------------------------------------------------------------

std::string expand_seed(const std::string& pattern, std::uint64_t seed) {
  std::string out = pattern;
  const std::string tag = "{seed}";
  for (auto pos = out.find(tag); pos != std::string::npos; pos = out.find(tag)) {
    out.replace(pos, tag.size(), std::to_string(seed));
  }
  return out;
}

std::string default_pretrain_checkpoint(const ExperimentConfig& config) {
  return (std::filesystem::path(config.output_dir) / "pretrain_seed{seed}.mlcp").string();
}

std::string default_method_checkpoint(const ExperimentConfig& config, const std::string& method) {
  return (std::filesystem::path(config.output_dir) / (method + "_seed{seed}.mlcp")).string();
}

void cmd_pretrain(const ExperimentConfig& config, std::ostream& log) {
  const World world = build_world(config);
  const std::filesystem::path dir(config.output_dir);
  for (std::uint64_t seed : config.seeds) {
    const PretrainResult r = pretrain(config, world, seed);
    save_checkpoint(expand_seed(default_pretrain_checkpoint(config), seed), {config.model, r.theta});
    auto curve = open_output(dir / ("pretrain_curve_seed" + std::to_string(seed) + ".csv"));
    write_curve_csv(curve, r.curve);
    log << "pretrain seed " << seed << ": loss " << r.curve.front().loss << " -> "
        << r.curve.back().loss << '\n';
  }
}

void cmd_adapt(const ExperimentConfig& config, const std::string& checkpoint,
               const std::string& algorithm, std::ostream& log) {
  const std::optional<Algorithm> alg = parse_adapt_algorithm(algorithm);
  const std::string method = method_label(alg);
  const World world = build_world(config);
  const std::filesystem::path dir(config.output_dir);
  for (std::uint64_t seed : config.seeds) {
    const std::string in_path = expand_seed(checkpoint, seed);
    const Checkpoint cp = load_checkpoint(in_path);
    const auto diffs = config_differences(cp.config, config.model);
    if (!diffs.empty()) {
      std::string msg = "checkpoint '" + in_path + "' model config differs from the experiment config:";
      for (const auto& d : diffs) msg += " " + d;
      throw ValidationError(msg);
    }
    const AdaptResult r = adapt(config, world, cp.theta, alg, seed);
    save_checkpoint(expand_seed(default_method_checkpoint(config, method), seed), {config.model, r.theta});
    auto out = open_output(dir / ("adapt_log_" + method + "_seed" + std::to_string(seed) + ".csv"));
    write_adapt_log_csv(out, r.log);
    log << "adapt " << method << " seed " << seed << ": " << r.log.size() << " log rows\n";
  }
}

void cmd_eval(const ExperimentConfig& config, const std::string& checkpoint,
              const std::string& method, const std::string& episodes_path, std::ostream& log) {
  std::map<std::size_t, std::vector<ChimeraEpisode>> bench;
  if (episodes_path.empty()) {
    const World world = build_world(config);
    for (std::size_t k : config.eval.k_shots) bench[k] = chimera_benchmark(config, world, k);
  } else {
    for (ChimeraEpisode& e : load_episodes_jsonl(episodes_path)) {
      if (!has_probes(e)) {
        throw ValidationError("episode '" + e.episode.id + "' has no probes/gold to score against");
      }
      bench[e.episode.k()].push_back(std::move(e));
    }
  }
  for (std::size_t k : config.eval.k_shots) {
    if (bench[k].empty()) {
      throw ValidationError("no episodes with K=" + std::to_string(k) + " to evaluate");
    }
  }
  std::vector<EvalResult> results;
  for (std::uint64_t seed : config.seeds) {
    const std::string path = expand_seed(checkpoint, seed);
    const Checkpoint cp = load_checkpoint(path);
    const auto diffs = config_differences(cp.config, config.model);
    if (!diffs.empty()) throw ValidationError("checkpoint '" + path + "' does not match model config");
    for (std::size_t k : config.eval.k_shots) {
      EvalResult r = evaluate_benchmark(cp.config, cp.theta, bench[k], k);
      r.method = method;
      r.seed = seed;
      log << "eval " << method << " seed " << seed << " k=" << k << ": " << r.mean_spearman << '\n';
      results.push_back(std::move(r));
    }
  }
  const std::filesystem::path dir(config.output_dir);
  auto per_episode = open_output(dir / ("eval_" + method + ".csv"));
  write_episode_csv(per_episode, results);
  auto summary = open_output(dir / ("summary_" + method + ".csv"));
  write_summary_csv(summary, results);
}

void cmd_analyze(const ExperimentConfig& config, const std::vector<std::string>& inputs,
                 const std::string& episodes_path, std::ostream& log) {
  std::vector<EvalResult> results;
  for (const std::string& path : inputs) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open results file '" + path + "'");
    for (EvalResult& r : read_episode_csv(in)) results.push_back(std::move(r));
  }
  std::set<std::size_t> ks;
  for (const auto& r : results) ks.insert(r.k_shot);

  std::map<std::size_t, std::map<std::string, double>> info;
  if (episodes_path.empty()) {
    const World world = build_world(config);
    for (std::size_t k : ks) {
      for (const ChimeraEpisode& e : chimera_benchmark(config, world, k)) {
        info[k][e.episode.id] = e.episode.informativeness.value_or(0.0);
      }
    }
  } else {
    bool complete = true;
    const auto episodes = load_episodes_jsonl(episodes_path);
    for (const ChimeraEpisode& e : episodes) {
      if (!e.episode.informativeness) complete = false;
      else info[e.episode.k()][e.episode.id] = *e.episode.informativeness;
    }
    if (!complete) {
      info.clear();
      log << "analyze: episode file lacks informativeness; skipping that correlation\n";
    }
  }
  const Analysis analysis = analyze_results(results, info, config.analyze);
  const std::filesystem::path dir(config.output_dir);
  auto out = open_output(dir / "analysis.csv");
  write_analysis_csv(out, analysis);
  auto pairs = open_output(dir / "ranking_pairs.csv");
  write_pairs_csv(pairs, analysis);
  for (const auto& r : analysis.rows) {
    log << "analyze " << r.scope << ' ' << r.metric << ": " << r.value << " [" << r.ci95_low << ", "
        << r.ci95_high << "]\n";
  }
}

void run_pipeline(const ExperimentConfig& config, std::ostream& log) {
  cmd_pretrain(config, log);
  std::vector<std::string> inputs;
  for (const std::string algorithm : {"none", "maml", "leap"}) {
    const std::string method = method_label(parse_adapt_algorithm(algorithm));
    cmd_adapt(config, default_pretrain_checkpoint(config), algorithm, log);
    cmd_eval(config, default_method_checkpoint(config, method), method, "", log);
    inputs.push_back((std::filesystem::path(config.output_dir) / ("eval_" + method + ".csv")).string());
  }
  cmd_analyze(config, inputs, "", log);
}

}  // namespace metaleap
