#include "metaleap/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "metaleap/error.hpp"

namespace metaleap {

namespace {

void require_pairs(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw ValidationError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw ValidationError(std::string(what) + ": need at least 2 pairs");
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  require_pairs(a, b, "pearson");
  if (is_constant(a) || is_constant(b)) throw UndefinedStatisticError();
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double spearman(std::span<const double> a, std::span<const double> b) {
  require_pairs(a, b, "spearman");
  if (is_constant(a) || is_constant(b)) throw UndefinedStatisticError();
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  return pearson(ra, rb);
}

double chimera_score(std::span<const double> prediction, const ChimeraEpisode& episode) {
  const Array& probes = episode.probes;
  if (probes.rows() != episode.gold.size() || probes.rows() < 2) {
    throw ValidationError("chimera episode '" + episode.episode.id +
                          "' needs matching probes and gold scores");
  }
  if (probes.cols() != prediction.size()) {
    throw ShapeError("chimera episode '" + episode.episode.id + "': probe dimension " +
                     std::to_string(probes.cols()) + " vs prediction " +
                     std::to_string(prediction.size()));
  }
  double pp = 0.0;
  for (double x : prediction) pp += x * x;
  if (pp == 0.0) throw DegenerateVectorError("chimera prediction");
  std::vector<double> sims(probes.rows());
  for (std::size_t r = 0; r < probes.rows(); ++r) {
    double dotp = 0.0, qq = 0.0;
    for (std::size_t j = 0; j < probes.cols(); ++j) {
      dotp += prediction[j] * probes.at(r, j);
      qq += probes.at(r, j) * probes.at(r, j);
    }
    if (qq == 0.0) throw DegenerateVectorError("probe vector");
    sims[r] = dotp / std::sqrt(pp * qq);
  }
  return spearman(sims, episode.gold);
}

double chimera_score(const RegressorConfig& config, const ParameterVector& theta,
                     const ChimeraEpisode& episode) {
  NoRecordGuard no_record;
  const Var pred = predict(config, theta, episode.episode.contexts);
  return chimera_score(pred.value().data(), episode);
}

EvalResult evaluate_benchmark(const RegressorConfig& config, const ParameterVector& theta,
                              std::span<const ChimeraEpisode> episodes, std::size_t k) {
  if (episodes.empty()) throw ValidationError("evaluate_benchmark: empty episode list");
  EvalResult r;
  r.k_shot = k;
  double total = 0.0;
  for (const ChimeraEpisode& ep : episodes) {
    if (ep.episode.k() != k) {
      throw ValidationError("episode '" + ep.episode.id + "' has K=" +
                            std::to_string(ep.episode.k()) + ", expected " + std::to_string(k));
    }
    const double s = chimera_score(config, theta, ep);
    r.per_episode.push_back({ep.episode.id, s});
    total += s;
  }
  const double n = static_cast<double>(episodes.size());
  r.mean_spearman = total / n;
  double ss = 0.0;
  for (const auto& e : r.per_episode) ss += (e.score - r.mean_spearman) * (e.score - r.mean_spearman);
  r.std = std::sqrt(ss / n);
  return r;
}

double Summary::ci95_low() const {
  return n > 0 ? mean - 1.96 * std / std::sqrt(static_cast<double>(n)) : mean;
}

double Summary::ci95_high() const {
  return n > 0 ? mean + 1.96 * std / std::sqrt(static_cast<double>(n)) : mean;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

RankingAgreement rank_episodes(std::span<const EvalResult> results) {
  if (results.size() < 2) throw ValidationError("rank_episodes needs at least two results");
  std::vector<std::string> ids;
  for (const auto& e : results.front().per_episode) ids.push_back(e.episode_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ValidationError("rank_episodes: duplicate episode ids");
  }

  RankingAgreement out;
  std::vector<std::vector<double>> rank_vectors;
  for (const EvalResult& r : results) {
    std::map<std::string, double> score_by_id;
    for (const auto& e : r.per_episode) score_by_id[e.episode_id] = e.score;
    std::vector<std::string> these;
    for (const auto& [id, _] : score_by_id) these.push_back(id);
    if (these != ids || r.per_episode.size() != ids.size()) {
      throw ValidationError("rank_episodes: episode id sets differ for '" + r.method + "' seed " +
                            std::to_string(r.seed));
    }
    std::vector<double> neg_scores;
    for (const auto& id : ids) neg_scores.push_back(-score_by_id[id]);
    std::vector<double> ranks = average_ranks(neg_scores);
    std::map<std::string, double> ranking;
    for (std::size_t i = 0; i < ids.size(); ++i) ranking[ids[i]] = ranks[i];
    out.rankings.emplace_back(r.method + "/seed" + std::to_string(r.seed), std::move(ranking));
    rank_vectors.push_back(std::move(ranks));
  }

  std::vector<double> values;
  for (std::size_t i = 0; i < results.size(); ++i) {
    for (std::size_t j = i + 1; j < results.size(); ++j) {
      const double s = spearman(rank_vectors[i], rank_vectors[j]);
      out.pairs.push_back({out.rankings[i].first, out.rankings[j].first, s});
      values.push_back(s);
    }
  }
  out.summary = summarize(values);
  out.mean = out.summary.mean;
  return out;
}

double informativeness_correlation(std::span<const double> informativeness,
                                   std::span<const double> scores) {
  return spearman(informativeness, scores);
}

BootstrapInterval bootstrap_spearman(std::span<const double> a, std::span<const double> b,
                                     std::size_t resamples, Rng& rng) {
  require_pairs(a, b, "bootstrap_spearman");
  BootstrapInterval out;
  out.estimate = spearman(a, b);
  out.resamples = resamples;
  if (resamples == 0) {
    out.low = out.high = out.estimate;
    return out;
  }
  const std::size_t n = a.size();
  std::vector<double> stats;
  stats.reserve(resamples);
  std::vector<double> ra(n), rb(n);
  std::size_t attempts = 0;
  while (stats.size() < resamples) {
    if (++attempts > 100 * resamples) throw UndefinedStatisticError();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = rng.uniform_index(n);
      ra[i] = a[j];
      rb[i] = b[j];
    }
    if (is_constant(ra) || is_constant(rb)) continue;
    stats.push_back(spearman(ra, rb));
  }
  std::sort(stats.begin(), stats.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(stats.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, stats.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return stats[lo] * (1.0 - w) + stats[hi] * w;
  };
  out.low = quantile(0.025);
  out.high = quantile(0.975);
  return out;
}

}  // namespace metaleap
