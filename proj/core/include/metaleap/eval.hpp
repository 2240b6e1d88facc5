#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metaleap/episode.hpp"
#include "metaleap/model.hpp"
#include "metaleap/parameters.hpp"
#include "metaleap/rng.hpp"

namespace metaleap {

/// Ranks starting at 1; tied values share the mean of their rank range.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> a, std::span<const double> b);

/// Spearman rank correlation with average ranks for ties. Throws
/// UndefinedStatisticError when either input is constant.
double spearman(std::span<const double> a, std::span<const double> b);

/// Cosine similarity of the predicted embedding to each probe, correlated
/// with the gold scores.
double chimera_score(const RegressorConfig& config, const ParameterVector& theta,
                     const ChimeraEpisode& episode);
/// Same, for an already computed prediction.
double chimera_score(std::span<const double> prediction, const ChimeraEpisode& episode);

struct EpisodeScore {
  std::string episode_id;
  double score = 0.0;
};

struct EvalResult {
  std::string method;
  std::size_t k_shot = 0;
  std::uint64_t seed = 0;
  double mean_spearman = 0.0;
  /// Population standard deviation over episodes.
  double std = 0.0;
  std::vector<EpisodeScore> per_episode;
};

EvalResult evaluate_benchmark(const RegressorConfig& config, const ParameterVector& theta,
                              std::span<const ChimeraEpisode> episodes, std::size_t k);

/// Sample mean and sample standard deviation.
struct Summary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
  double ci95_low() const;
  double ci95_high() const;
};
Summary summarize(std::span<const double> values);

struct RankingAgreement {
  /// run label -> episode id -> rank (1 = best score)
  std::vector<std::pair<std::string, std::map<std::string, double>>> rankings;
  struct Pair {
    std::string a, b;
    double spearman = 0.0;
  };
  std::vector<Pair> pairs;
  double mean = 0.0;
  Summary summary;
};

/// Ranks episodes per result and correlates every pair of rankings. All
/// results must cover the same episode ids.
RankingAgreement rank_episodes(std::span<const EvalResult> results);

/// Spearman correlation of informativeness against score.
double informativeness_correlation(std::span<const double> informativeness,
                                   std::span<const double> scores);

struct BootstrapInterval {
  double estimate = 0.0;
  double low = 0.0;
  double high = 0.0;
  std::size_t resamples = 0;
};

/// Percentile bootstrap (2.5%, 97.5%) of spearman(a, b) over paired
/// resamples. Degenerate resamples (constant input) are redrawn.
BootstrapInterval bootstrap_spearman(std::span<const double> a, std::span<const double> b,
                                     std::size_t resamples, Rng& rng);

}  // namespace metaleap
