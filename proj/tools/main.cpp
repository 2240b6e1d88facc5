// metaleap: pre-train, adapt, evaluate and analyze few-shot embedding
// regressors on synthetic corpora.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metaleap/config.hpp"
#include "metaleap/error.hpp"
#include "metaleap/experiment.hpp"
#include "metaleap/selftest.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kValidation = 2, kNumeric = 3 };

struct CommonFlags {
  std::string config_path;
  std::string out;
  std::vector<std::string> overrides;
  long long seed = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "key=value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory (overrides output_dir)");
  cmd->add_option("--seed", f.seed, "run a single seed instead of the configured list")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--set", f.overrides, "extra key=value override (repeatable)");
}

metaleap::ExperimentConfig resolve(const CommonFlags& f) {
  metaleap::KeyValueConfig kv;
  if (!f.config_path.empty()) kv = metaleap::KeyValueConfig::load(f.config_path);
  for (const auto& o : f.overrides) kv.set_assignment(o);
  if (!f.out.empty()) kv.set("output_dir", f.out);
  if (f.seed >= 0) kv.set("seeds", std::to_string(f.seed));
  return metaleap::ExperimentConfig::from(kv);
}

int run_selftest() {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  for (const auto& c : metaleap::run_selftest()) {
    std::printf("%s  %-55s error %.3e (tolerance %.0e)\n", c.passed() ? "PASS" : "FAIL",
                c.name.c_str(), c.error, c.tolerance);
    ok = ok && c.passed();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("selftest %s in %.2f s\n", ok ? "passed" : "FAILED", secs);
  return ok ? kOk : kNumeric;
}

int run_sinusoid(const std::vector<unsigned long long>& seeds, std::size_t iters) {
  metaleap::SinusoidSettings s;
  s.meta_iters = iters;
  std::printf("seed,random_init_mse,maml_mse,leap_mse\n");
  for (auto seed : seeds) {
    const auto r = metaleap::run_sinusoid_experiment(s, seed);
    std::printf("%llu,%.6f,%.6f,%.6f\n", seed, r.random_init_mse, r.maml_mse, r.leap_mse);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learned initializations for few-shot embedding regression"};
  app.require_subcommand(1);

  CommonFlags pre_f, adapt_f, eval_f, analyze_f, pipe_f;
  std::string adapt_ckpt, adapt_alg, eval_ckpt, eval_alg = "none", eval_episodes, analyze_episodes;
  std::vector<std::string> analyze_inputs;
  std::vector<unsigned long long> sin_seeds{1, 2, 3, 4, 5};
  std::size_t sin_iters = 2000;
  const std::vector<std::string> algorithms{"none", "maml", "fomaml", "leap"};

  auto* pre = app.add_subcommand("pretrain", "pre-train the regressor on the source corpus");
  add_common(pre, pre_f);

  auto* adapt = app.add_subcommand("adapt", "adapt a pre-trained checkpoint to the shifted corpus");
  add_common(adapt, adapt_f);
  adapt->add_option("--checkpoint", adapt_ckpt, "input checkpoint; {seed} is replaced per seed");
  adapt->add_option("--algorithm", adapt_alg, "adaptation algorithm")
      ->required()
      ->check(CLI::IsMember(algorithms));

  auto* eval = app.add_subcommand("eval", "score checkpoints on the chimera benchmark");
  add_common(eval, eval_f);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint; {seed} is replaced per seed");
  eval->add_option("--algorithm", eval_alg, "method whose checkpoints are scored")
      ->check(CLI::IsMember(algorithms));
  eval->add_option("--episodes", eval_episodes, "JSON-lines episode file instead of the benchmark")
      ->check(CLI::ExistingFile);

  auto* analyze = app.add_subcommand("analyze", "ranking agreement and informativeness analysis");
  add_common(analyze, analyze_f);
  analyze->add_option("results", analyze_inputs, "per-episode CSV files")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--episodes", analyze_episodes, "JSON-lines episode file with informativeness")
      ->check(CLI::ExistingFile);

  auto* pipeline = app.add_subcommand("pipeline", "pretrain, adapt (none/maml/leap), eval, analyze");
  add_common(pipeline, pipe_f);

  auto* selftest = app.add_subcommand("selftest", "finite-difference and hand-oracle checks");

  auto* sinusoid = app.add_subcommand("sinusoid", "sinusoid few-shot regression comparison");
  sinusoid->add_option("--seeds", sin_seeds, "seeds")->delimiter(',');
  sinusoid->add_option("--iters", sin_iters, "meta-iterations")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*selftest) return run_selftest();
    if (*sinusoid) return run_sinusoid(sin_seeds, sin_iters);
    if (*pre) {
      metaleap::cmd_pretrain(resolve(pre_f), std::cout);
    } else if (*adapt) {
      const auto cfg = resolve(adapt_f);
      metaleap::cmd_adapt(cfg, adapt_ckpt.empty() ? metaleap::default_pretrain_checkpoint(cfg) : adapt_ckpt,
                          adapt_alg, std::cout);
    } else if (*eval) {
      const auto cfg = resolve(eval_f);
      const std::string method =
          metaleap::method_label(metaleap::parse_adapt_algorithm(eval_alg));
      metaleap::cmd_eval(cfg, eval_ckpt.empty() ? metaleap::default_method_checkpoint(cfg, method) : eval_ckpt,
                         method, eval_episodes, std::cout);
    } else if (*analyze) {
      metaleap::cmd_analyze(resolve(analyze_f), analyze_inputs, analyze_episodes, std::cout);
    } else if (*pipeline) {
      metaleap::run_pipeline(resolve(pipe_f), std::cout);
    }
  } catch (const metaleap::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kOk;
}
