#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metaleap/episode.hpp"
#include "metaleap/metalearn.hpp"
#include "metaleap/model.hpp"
#include "metaleap/rng.hpp"

namespace metaleap {

// ---------------------------------------------------------------------------
// Sinusoid regression

struct SinusoidTask {
  double amplitude = 1.0;
  double phase = 0.0;
  double noise_sd = 0.0;

  double value(double x) const;
  /// n points with x ~ U[-5, 5], targets A sin(x + phase) + noise.
  RegressionBatch sample_batch(Rng& rng, std::size_t n) const;
};

inline constexpr double kSinusoidMinAmplitude = 0.1;
inline constexpr double kSinusoidMaxAmplitude = 5.0;
inline constexpr double kSinusoidInputRange = 5.0;

/// Amplitude ~ U[0.1, 5], phase ~ U[0, pi].
SinusoidTask sample_sinusoid_params(Rng& rng, double noise_sd = 0.0);

/// Wraps sinusoid parameters as a Task on an MLP with `batch_size`-point
/// support and query batches.
Task make_sinusoid_task(const SinusoidTask& params, const MlpConfig& model, std::size_t batch_size,
                        std::string id);

Task sample_sinusoid_task(Rng& rng, const MlpConfig& model, std::size_t batch_size,
                          double noise_sd = 0.0);

// ---------------------------------------------------------------------------
// Synthetic embedding corpora

struct CorpusSpec {
  std::size_t vocab_size = 400;
  std::size_t dim = 16;
  std::size_t n_topics = 8;
  /// Per-dimension sd of a word's offset from its topic center.
  double topic_spread = 0.3;
  std::size_t context_len = 6;
  double context_noise_sd = 0.1;
  double zipf_s = 1.0;
  /// Probability that an in-topic token is the word itself.
  double self_token_prob = 0.0;
  /// Per-episode in-topic token probability ~ U[min, max].
  double informativeness_min = 0.1;
  double informativeness_max = 0.9;

  void validate() const;
};

struct SyntheticCorpus {
  CorpusSpec spec;
  /// vocab_size x dim, unit-norm rows.
  Array embeddings{Shape{0, 0}};
  /// n_topics x dim, unit-norm rows.
  Array topic_centers{Shape{0, 0}};
  std::vector<std::size_t> topic_of;
  /// Zipfian unigram probabilities.
  std::vector<double> frequency;
  /// Words whose embeddings were redrawn by a domain shift.
  std::vector<bool> novel;

  std::size_t vocab_size() const noexcept { return topic_of.size(); }
  std::size_t dim() const noexcept { return spec.dim; }
  Array embedding(std::size_t word) const;
  std::vector<std::size_t> topic_members(std::size_t topic) const;
  std::vector<std::size_t> novel_words() const;
  std::vector<std::size_t> known_words() const;
};

SyntheticCorpus build_synthetic_corpus(const CorpusSpec& spec, std::uint64_t seed);

/// Rotates every embedding by R^shift (R a random rotation, so shift 0 is the
/// identity), then redraws `resample_fraction` of the vocabulary as novel words.
SyntheticCorpus derive_shifted_corpus(const SyntheticCorpus& base, double shift_strength,
                                      std::uint64_t seed, double resample_fraction = 0.2);

/// Mean cosine similarity of word pairs within a topic and across topics.
struct TopicSeparation {
  double within = 0.0;
  double across = 0.0;
};
TopicSeparation topic_separation(const SyntheticCorpus& corpus);

/// K contexts for `word_id`, each the normalized mean of context_len token
/// vectors plus Gaussian noise; tokens are in-topic with a per-episode
/// probability.
Episode sample_oov_episode(const SyntheticCorpus& corpus, std::int64_t word_id, std::size_t k,
                           Rng& rng, std::string id = {});

/// K/2 contexts around the pivot and K/2 around the compatible word; probes
/// at staggered similarity ranks to normalize(e_pivot + e_compatible).
ChimeraEpisode make_chimera_episode(const SyntheticCorpus& corpus, std::int64_t pivot_id,
                                    std::int64_t compatible_id, std::size_t k, Rng& rng,
                                    std::string id = {});

struct EpisodeSamplerOptions {
  std::size_t batch_size = 16;
  std::vector<std::size_t> k_choices{2, 4, 6};
};

/// Task whose batches are OOV episodes of words drawn uniformly from
/// `words`, scored by the cosine embedding loss.
Task make_corpus_task(const SyntheticCorpus& corpus, std::vector<std::size_t> words,
                      const RegressorConfig& model, const EpisodeSamplerOptions& options,
                      std::string id);

/// Fixed chimera benchmark: `count` episodes with K = k. Pivots are drawn from
/// `pivot_pool`; each compatible word is one of the pivot's 10 nearest words.
std::vector<ChimeraEpisode> make_chimera_benchmark(const SyntheticCorpus& corpus,
                                                   const std::vector<std::size_t>& pivot_pool,
                                                   std::size_t count, std::size_t k,
                                                   std::uint64_t seed);

}  // namespace metaleap
