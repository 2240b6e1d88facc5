#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "metaleap/error.hpp"
#include "metaleap/taskgen.hpp"

using namespace metaleap;

namespace {

double row_dot(const Array& a, std::size_t i, const Array& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) s += a.at(i, c) * b.at(j, c);
  return s;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

SyntheticCorpus default_corpus(std::uint64_t seed = 5) { return build_synthetic_corpus(CorpusSpec{}, seed); }

double mean_context_cosine(double noise_sd) {
  CorpusSpec spec;
  spec.context_noise_sd = noise_sd;
  const SyntheticCorpus corpus = build_synthetic_corpus(spec, 3);
  Rng rng(17);
  double total = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto word = static_cast<std::int64_t>(rng.uniform_index(corpus.vocab_size()));
    const Episode ep = sample_oov_episode(corpus, word, 2, rng);
    const Array& c = ep.contexts.matrix();
    std::vector<double> mean(c.cols(), 0.0);
    for (std::size_t r = 0; r < c.rows(); ++r) {
      for (std::size_t j = 0; j < c.cols(); ++j) mean[j] += c.at(r, j);
    }
    double dotp = 0.0;
    for (std::size_t j = 0; j < c.cols(); ++j) dotp += mean[j] * (*ep.target)[j];
    total += dotp / norm(mean);
  }
  return total / 1000.0;
}

}  // namespace

TEST(Sinusoid, ZeroAtOriginWithZeroPhase) {
  SinusoidTask t{.amplitude = 3.0, .phase = 0.0, .noise_sd = 0.0};
  EXPECT_EQ(t.value(0.0), 0.0);
}

TEST(Sinusoid, PeakEqualsAmplitude) {
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const SinusoidTask t = sample_sinusoid_params(rng);
    EXPECT_NEAR(t.value(std::numbers::pi / 2 - t.phase), t.amplitude, 1e-12);
  }
}

TEST(Sinusoid, ParameterRangesAndDeterminism) {
  Rng a(9), b(9);
  for (int i = 0; i < 500; ++i) {
    const SinusoidTask t = sample_sinusoid_params(a);
    const SinusoidTask u = sample_sinusoid_params(b);
    EXPECT_EQ(t.amplitude, u.amplitude);
    EXPECT_EQ(t.phase, u.phase);
    EXPECT_GE(t.amplitude, 0.1);
    EXPECT_LE(t.amplitude, 5.0);
    EXPECT_GE(t.phase, 0.0);
    EXPECT_LE(t.phase, std::numbers::pi);
  }
}

TEST(Sinusoid, BatchesFollowTheCurve) {
  Rng rng(4);
  const SinusoidTask t = sample_sinusoid_params(rng);
  const RegressionBatch b = t.sample_batch(rng, 20);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_GE(b.inputs[i], -5.0);
    EXPECT_LE(b.inputs[i], 5.0);
    EXPECT_EQ(b.targets[i], t.value(b.inputs[i]));
  }
  EXPECT_THROW(make_sinusoid_task(t, MlpConfig{}, 0, "x"), ValidationError);
}

TEST(Corpus, RowsAreUnitNorm) {
  const SyntheticCorpus c = default_corpus();
  for (std::size_t w = 0; w < c.vocab_size(); ++w) {
    EXPECT_NEAR(std::sqrt(row_dot(c.embeddings, w, c.embeddings, w)), 1.0, 1e-12);
  }
  double total = 0.0;
  for (double f : c.frequency) total += f;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Corpus, TopicsAreSeparated) {
  for (std::uint64_t seed : {1u, 5u, 9u}) {
    const TopicSeparation s = topic_separation(default_corpus(seed));
    EXPECT_GE(s.within - s.across, 0.2) << seed;
  }
}

TEST(Corpus, SameSeedSameCorpus) {
  const SyntheticCorpus a = default_corpus(7), b = default_corpus(7), c = default_corpus(8);
  EXPECT_EQ(a.embeddings, b.embeddings);
  EXPECT_EQ(a.topic_of, b.topic_of);
  EXPECT_EQ(a.frequency, b.frequency);
  EXPECT_NE(a.embeddings, c.embeddings);
}

TEST(Corpus, InvalidSpecRejected) {
  CorpusSpec s;
  s.vocab_size = 5;
  EXPECT_THROW(build_synthetic_corpus(s, 1), ValidationError);
  s = CorpusSpec{};
  s.informativeness_min = 0.9;
  s.informativeness_max = 0.1;
  EXPECT_THROW(build_synthetic_corpus(s, 1), ValidationError);
}

TEST(Shift, ZeroStrengthNoResampleIsIdentity) {
  const SyntheticCorpus base = default_corpus();
  const SyntheticCorpus same = derive_shifted_corpus(base, 0.0, 3, 0.0);
  EXPECT_EQ(same.embeddings, base.embeddings);
  EXPECT_TRUE(same.novel_words().empty());
}

TEST(Shift, FullStrengthMovesWordsAway) {
  const SyntheticCorpus base = default_corpus();
  const SyntheticCorpus shifted = derive_shifted_corpus(base, 1.0, 3, 0.0);
  double total = 0.0;
  for (std::size_t w = 0; w < base.vocab_size(); ++w) total += row_dot(base.embeddings, w, shifted.embeddings, w);
  EXPECT_LT(total / static_cast<double>(base.vocab_size()), 0.9);
}

TEST(Shift, RotationPreservesPairwiseCosines) {
  const SyntheticCorpus base = default_corpus();
  const SyntheticCorpus shifted = derive_shifted_corpus(base, 0.5, 3, 0.2);
  const auto known = shifted.known_words();
  EXPECT_EQ(shifted.novel_words().size(), 80u);
  EXPECT_EQ(known.size() + shifted.novel_words().size(), base.vocab_size());
  double worst = 0.0;
  for (std::size_t i = 0; i < known.size(); i += 3) {
    for (std::size_t j = i + 1; j < known.size(); j += 7) {
      const double before = row_dot(base.embeddings, known[i], base.embeddings, known[j]);
      const double after = row_dot(shifted.embeddings, known[i], shifted.embeddings, known[j]);
      worst = std::max(worst, std::abs(before - after));
    }
  }
  EXPECT_LT(worst, 1e-10);
  EXPECT_THROW(derive_shifted_corpus(base, 1.5, 3), ValidationError);
}

TEST(OovEpisode, NoiselessSelfContextEqualsTarget) {
  CorpusSpec spec;
  spec.context_noise_sd = 0.0;
  spec.context_len = 1;
  spec.self_token_prob = 1.0;
  spec.informativeness_min = spec.informativeness_max = 1.0;
  const SyntheticCorpus c = build_synthetic_corpus(spec, 2);
  Rng rng(1);
  const Episode ep = sample_oov_episode(c, 17, 3, rng);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t j = 0; j < c.dim(); ++j) EXPECT_NEAR(ep.contexts.matrix().at(r, j), (*ep.target)[j], 1e-15);
  }
  EXPECT_EQ(*ep.informativeness, 1.0);
}

TEST(OovEpisode, InvariantsHold) {
  const SyntheticCorpus c = default_corpus();
  Rng rng(6);
  for (int i = 0; i < 300; ++i) {
    const std::size_t k = 1 + rng.uniform_index(6);
    const Episode ep = sample_oov_episode(c, static_cast<std::int64_t>(rng.uniform_index(400)), k, rng);
    EXPECT_EQ(ep.k(), k);
    EXPECT_GE(*ep.informativeness, 0.0);
    EXPECT_LE(*ep.informativeness, 1.0);
    EXPECT_NEAR(norm(ep.target->data()), 1.0, 1e-12);
    EXPECT_TRUE(ep.contexts.matrix().all_finite());
  }
  EXPECT_THROW(sample_oov_episode(c, 400, 2, rng), ValidationError);
  EXPECT_THROW(sample_oov_episode(c, -1, 2, rng), ValidationError);
  EXPECT_THROW(sample_oov_episode(c, 3, 0, rng), ValidationError);
}

TEST(OovEpisode, ContextQualityFallsWithNoise) {
  const std::vector<double> levels{0.0, 0.05, 0.2, 0.5, 1.0};
  std::vector<double> cos;
  for (double sd : levels) cos.push_back(mean_context_cosine(sd));
  for (std::size_t i = 1; i < cos.size(); ++i) EXPECT_LT(cos[i], cos[i - 1]) << levels[i];
}

TEST(OovEpisode, Deterministic) {
  const SyntheticCorpus c = default_corpus();
  Rng a(3), b(3);
  EXPECT_EQ(sample_oov_episode(c, 4, 4, a).contexts.matrix(), sample_oov_episode(c, 4, 4, b).contexts.matrix());
}

TEST(Chimera, PreconditionsRejected) {
  const SyntheticCorpus c = default_corpus();
  Rng rng(1);
  EXPECT_THROW(make_chimera_episode(c, 3, 3, 2, rng), ValidationError);
  EXPECT_THROW(make_chimera_episode(c, 3, 4, 3, rng), ValidationError);
  EXPECT_THROW(make_chimera_episode(c, 3, 4, 0, rng), ValidationError);
}

TEST(Chimera, StructureProbesAndGold) {
  const SyntheticCorpus c = default_corpus();
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto pivot = static_cast<std::int64_t>(rng.uniform_index(400));
    auto compat = static_cast<std::int64_t>(rng.uniform_index(400));
    if (compat == pivot) compat = (pivot + 1) % 400;
    const std::size_t k = 2 * (1 + rng.uniform_index(3));
    const ChimeraEpisode ep = make_chimera_episode(c, pivot, compat, k, rng);
    ASSERT_EQ(ep.probe_ids.size(), kProbesPerChimera);
    ASSERT_EQ(ep.gold.size(), kProbesPerChimera);
    EXPECT_EQ(ep.probes.rows(), kProbesPerChimera);
    EXPECT_EQ(std::count(ep.context_words.begin(), ep.context_words.end(), pivot), static_cast<long>(k / 2));
    EXPECT_EQ(std::count(ep.context_words.begin(), ep.context_words.end(), compat), static_cast<long>(k / 2));

    std::vector<double> blend(c.dim());
    for (std::size_t j = 0; j < c.dim(); ++j) blend[j] = c.embeddings.at(pivot, j) + c.embeddings.at(compat, j);
    const double bn = norm(blend);
    std::vector<double> cos_to_blend;
    for (std::size_t p = 0; p < kProbesPerChimera; ++p) {
      double s = 0.0;
      for (std::size_t j = 0; j < c.dim(); ++j) s += blend[j] / bn * ep.probes.at(p, j);
      cos_to_blend.push_back(s);
      EXPECT_NEAR(ep.gold[p], s, 1e-12);
      EXPECT_NE(ep.probe_ids[p], pivot);
      EXPECT_NE(ep.probe_ids[p], compat);
    }
    std::vector<std::size_t> by_gold(6), by_cos(6);
    for (std::size_t i = 0; i < 6; ++i) by_gold[i] = by_cos[i] = i;
    std::sort(by_gold.begin(), by_gold.end(), [&](auto a, auto b) { return ep.gold[a] > ep.gold[b]; });
    std::sort(by_cos.begin(), by_cos.end(), [&](auto a, auto b) { return cos_to_blend[a] > cos_to_blend[b]; });
    EXPECT_EQ(by_gold, by_cos);
  }
}

TEST(Chimera, TwoShotHasOneContextPerWord) {
  const SyntheticCorpus c = default_corpus();
  Rng rng(8);
  const ChimeraEpisode ep = make_chimera_episode(c, 10, 20, 2, rng);
  EXPECT_EQ(ep.context_words, (std::vector<std::int64_t>{10, 20}));
}

TEST(Chimera, BenchmarkIsDeterministic) {
  const SyntheticCorpus c = default_corpus();
  std::vector<std::size_t> pool{1, 2, 3, 4, 5, 6, 7, 8};
  const auto a = make_chimera_benchmark(c, pool, 10, 4, 3);
  const auto b = make_chimera_benchmark(c, pool, 10, 4, 3);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].episode.contexts.matrix(), b[i].episode.contexts.matrix());
    EXPECT_EQ(a[i].gold, b[i].gold);
    EXPECT_EQ(a[i].episode.k(), 4u);
  }
  const auto other_k = make_chimera_benchmark(c, pool, 10, 2, 3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].pivot_id, other_k[i].pivot_id);
  EXPECT_THROW(make_chimera_benchmark(c, {}, 10, 4, 3), ValidationError);
}

TEST(CorpusTask, BatchesAndLoss) {
  const SyntheticCorpus c = default_corpus();
  RegressorConfig model;
  const Task t = make_corpus_task(c, {1, 2, 3}, model, EpisodeSamplerOptions{.batch_size = 8, .k_choices = {2, 4}}, "corpus");
  Rng rng(5);
  const Batch b = t.sample_support(rng);
  const auto& eps = std::get<EpisodeBatch>(b);
  ASSERT_EQ(eps.size(), 8u);
  for (const Episode& e : eps) {
    EXPECT_TRUE(e.k() == 2 || e.k() == 4);
    EXPECT_TRUE(e.word_id >= 1 && e.word_id <= 3);
  }
  const double loss = t.loss(init_params(model, 1), b).item();
  EXPECT_GE(loss, 0.0);
  EXPECT_LE(loss, 2.0);
  model.embedding_dim = 8;
  EXPECT_THROW(make_corpus_task(c, {1}, model, {}, "x"), ShapeError);
}
