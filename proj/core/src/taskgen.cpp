#include "metaleap/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "metaleap/error.hpp"

namespace metaleap {

namespace {

void normalize_in_place(std::span<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n == 0.0) throw DegenerateVectorError("normalize");
  for (double& x : v) x /= n;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

std::span<const double> row(const Array& m, std::size_t r) {
  return m.data().subspan(r * m.cols(), m.cols());
}

std::span<double> row(Array& m, std::size_t r) { return m.data().subspan(r * m.cols(), m.cols()); }

std::vector<double> random_unit(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  do {
    for (double& x : v) x = rng.normal();
  } while (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }));
  normalize_in_place(v);
  return v;
}

void draw_member(const Array& centers, std::size_t topic, double spread, Rng& rng,
                 std::span<double> out) {
  const auto c = row(centers, topic);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = c[j] + rng.normal(0.0, spread);
  normalize_in_place(out);
}

// Orthonormal basis (columns) from a Gaussian matrix by twice-applied
// modified Gram-Schmidt.
Array random_orthonormal_basis(Rng& rng, std::size_t d) {
  Array q(Shape{d, d});
  for (double& x : q.data()) x = rng.normal();
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t p = 0; p < c; ++p) {
        double proj = 0.0;
        for (std::size_t r = 0; r < d; ++r) proj += q.at(r, c) * q.at(r, p);
        for (std::size_t r = 0; r < d; ++r) q.at(r, c) -= proj * q.at(r, p);
      }
      double n = 0.0;
      for (std::size_t r = 0; r < d; ++r) n += q.at(r, c) * q.at(r, c);
      n = std::sqrt(n);
      for (std::size_t r = 0; r < d; ++r) q.at(r, c) /= n;
    }
  }
  return q;
}

// A rotation B diag(R(t*phi_k)) B^T: the geodesic from the identity (t = 0)
// to a random rotation (t = 1).
class FractionalRotation {
 public:
  FractionalRotation(Rng& rng, std::size_t d, double t) : basis_(random_orthonormal_basis(rng, d)) {
    for (std::size_t k = 0; k < d / 2; ++k) {
      angles_.push_back(t * rng.uniform(-std::numbers::pi, std::numbers::pi));
    }
  }

  void apply(std::span<double> v) const {
    const std::size_t d = v.size();
    std::vector<double> c(d, 0.0);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t r = 0; r < d; ++r) c[j] += basis_.at(r, j) * v[r];
    for (std::size_t k = 0; k < angles_.size(); ++k) {
      const double cs = std::cos(angles_[k]), sn = std::sin(angles_[k]);
      const double x = c[2 * k], y = c[2 * k + 1];
      c[2 * k] = cs * x - sn * y;
      c[2 * k + 1] = sn * x + cs * y;
    }
    for (std::size_t r = 0; r < d; ++r) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += basis_.at(r, j) * c[j];
      v[r] = acc;
    }
  }

 private:
  Array basis_;
  std::vector<double> angles_;
};

std::vector<double> cumulative(const std::vector<std::size_t>& words,
                               const std::vector<double>& freq) {
  std::vector<double> cum(words.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    acc += freq[words[i]];
    cum[i] = acc;
  }
  return cum;
}

// Token sampler for contexts around one word.
class TokenSampler {
 public:
  TokenSampler(const SyntheticCorpus& corpus, std::size_t word) : corpus_(corpus), word_(word) {
    const std::size_t topic = corpus.topic_of[word];
    for (std::size_t w = 0; w < corpus.vocab_size(); ++w) {
      if (w == word) continue;
      (corpus.topic_of[w] == topic ? in_topic_ : off_topic_).push_back(w);
    }
    in_cum_ = cumulative(in_topic_, corpus.frequency);
    off_cum_ = cumulative(off_topic_, corpus.frequency);
  }

  std::size_t draw(bool in_topic, Rng& rng) const {
    if (in_topic) {
      if (in_topic_.empty() || rng.bernoulli(corpus_.spec.self_token_prob)) return word_;
      return in_topic_[rng.categorical(in_cum_)];
    }
    if (off_topic_.empty()) return word_;
    return off_topic_[rng.categorical(off_cum_)];
  }

 private:
  const SyntheticCorpus& corpus_;
  std::size_t word_;
  std::vector<std::size_t> in_topic_, off_topic_;
  std::vector<double> in_cum_, off_cum_;
};

// One context vector; returns the number of in-topic tokens used.
std::size_t make_context(const SyntheticCorpus& corpus, const TokenSampler& sampler,
                         double topic_prob, Rng& rng, std::span<double> out) {
  const std::size_t len = corpus.spec.context_len;
  std::fill(out.begin(), out.end(), 0.0);
  std::size_t in_topic = 0;
  for (std::size_t t = 0; t < len; ++t) {
    const bool hit = rng.bernoulli(topic_prob);
    in_topic += hit ? 1 : 0;
    const auto e = row(corpus.embeddings, sampler.draw(hit, rng));
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += e[j];
  }
  for (double& x : out) {
    x = x / static_cast<double>(len) + rng.normal(0.0, corpus.spec.context_noise_sd);
  }
  normalize_in_place(out);
  return in_topic;
}

void check_word(const SyntheticCorpus& corpus, std::int64_t word) {
  if (word < 0 || static_cast<std::size_t>(word) >= corpus.vocab_size()) {
    throw ValidationError("unknown word id " + std::to_string(word) + " (vocabulary size " +
                          std::to_string(corpus.vocab_size()) + ")");
  }
}

std::vector<std::size_t> nearest_words(const SyntheticCorpus& corpus, std::size_t word,
                                       std::size_t count) {
  std::vector<std::pair<double, std::size_t>> sims;
  const auto e = row(corpus.embeddings, word);
  for (std::size_t w = 0; w < corpus.vocab_size(); ++w) {
    if (w != word) sims.emplace_back(cosine(e, row(corpus.embeddings, w)), w);
  }
  count = std::min(count, sims.size());
  std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(count), sims.end(),
                    [](const auto& a, const auto& b) {
                      return a.first > b.first || (a.first == b.first && a.second < b.second);
                    });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(sims[i].second);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

double SinusoidTask::value(double x) const { return amplitude * std::sin(x + phase); }

RegressionBatch SinusoidTask::sample_batch(Rng& rng, std::size_t n) const {
  RegressionBatch b{Array(Shape{n, 1}), Array(Shape{n, 1})};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-kSinusoidInputRange, kSinusoidInputRange);
    b.inputs[i] = x;
    b.targets[i] = value(x) + (noise_sd > 0.0 ? rng.normal(0.0, noise_sd) : 0.0);
  }
  return b;
}

SinusoidTask sample_sinusoid_params(Rng& rng, double noise_sd) {
  SinusoidTask t;
  t.amplitude = rng.uniform(kSinusoidMinAmplitude, kSinusoidMaxAmplitude);
  t.phase = rng.uniform(0.0, std::numbers::pi);
  t.noise_sd = noise_sd;
  return t;
}

Task make_sinusoid_task(const SinusoidTask& params, const MlpConfig& model, std::size_t batch_size,
                        std::string id) {
  if (batch_size == 0) throw ValidationError("sinusoid batch size must be >= 1");
  Task task;
  task.id = std::move(id);
  auto sampler = [params, batch_size](Rng& rng) -> Batch {
    return params.sample_batch(rng, batch_size);
  };
  task.sample_support = sampler;
  task.sample_query = sampler;
  task.loss = [model](const ParameterVector& theta, const Batch& batch) {
    const auto& b = std::get<RegressionBatch>(batch);
    return mse_loss(model, theta, b.inputs, b.targets);
  };
  return task;
}

Task sample_sinusoid_task(Rng& rng, const MlpConfig& model, std::size_t batch_size,
                          double noise_sd) {
  const SinusoidTask params = sample_sinusoid_params(rng, noise_sd);
  return make_sinusoid_task(params, model, batch_size, "sinusoid");
}

// ---------------------------------------------------------------------------

void CorpusSpec::validate() const {
  if (vocab_size < 10) throw ValidationError("vocab_size must be >= 10");
  if (dim < 2) throw ValidationError("corpus dim must be >= 2");
  if (n_topics < 1 || n_topics > vocab_size) throw ValidationError("n_topics must be in [1, vocab_size]");
  if (context_len < 1) throw ValidationError("context_len must be >= 1");
  if (topic_spread < 0.0 || context_noise_sd < 0.0) throw ValidationError("noise levels must be >= 0");
  if (zipf_s < 0.0) throw ValidationError("zipf_s must be >= 0");
  if (self_token_prob < 0.0 || self_token_prob > 1.0) throw ValidationError("self_token_prob must be in [0, 1]");
  if (!(0.0 <= informativeness_min && informativeness_min <= informativeness_max &&
        informativeness_max <= 1.0)) {
    throw ValidationError("informativeness range must satisfy 0 <= min <= max <= 1");
  }
}

Array SyntheticCorpus::embedding(std::size_t word) const {
  const auto r = row(embeddings, word);
  return Array::vector(std::vector<double>(r.begin(), r.end()));
}

std::vector<std::size_t> SyntheticCorpus::topic_members(std::size_t topic) const {
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < topic_of.size(); ++w) {
    if (topic_of[w] == topic) out.push_back(w);
  }
  return out;
}

std::vector<std::size_t> SyntheticCorpus::novel_words() const {
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < novel.size(); ++w) {
    if (novel[w]) out.push_back(w);
  }
  return out;
}

std::vector<std::size_t> SyntheticCorpus::known_words() const {
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < novel.size(); ++w) {
    if (!novel[w]) out.push_back(w);
  }
  return out;
}

SyntheticCorpus build_synthetic_corpus(const CorpusSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  SyntheticCorpus c;
  c.spec = spec;
  const std::size_t v = spec.vocab_size, d = spec.dim;

  c.topic_centers = Array(Shape{spec.n_topics, d});
  for (std::size_t t = 0; t < spec.n_topics; ++t) {
    const auto u = random_unit(rng, d);
    std::copy(u.begin(), u.end(), row(c.topic_centers, t).begin());
  }

  c.embeddings = Array(Shape{v, d});
  c.topic_of.resize(v);
  for (std::size_t w = 0; w < v; ++w) {
    c.topic_of[w] = w % spec.n_topics;
    draw_member(c.topic_centers, c.topic_of[w], spec.topic_spread, rng, row(c.embeddings, w));
  }

  std::vector<std::size_t> rank(v);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  rng.shuffle(rank);
  c.frequency.resize(v);
  double z = 0.0;
  for (std::size_t w = 0; w < v; ++w) {
    c.frequency[w] = 1.0 / std::pow(static_cast<double>(rank[w] + 1), spec.zipf_s);
    z += c.frequency[w];
  }
  for (double& f : c.frequency) f /= z;
  c.novel.assign(v, false);
  return c;
}

SyntheticCorpus derive_shifted_corpus(const SyntheticCorpus& base, double shift_strength,
                                      std::uint64_t seed, double resample_fraction) {
  if (!(shift_strength >= 0.0 && shift_strength <= 1.0)) {
    throw ValidationError("shift_strength must be in [0, 1]");
  }
  if (!(resample_fraction >= 0.0 && resample_fraction <= 1.0)) {
    throw ValidationError("resample_fraction must be in [0, 1]");
  }
  Rng rng(seed);
  SyntheticCorpus c = base;
  const FractionalRotation rotation(rng, base.dim(), shift_strength);
  if (shift_strength > 0.0) {
    for (std::size_t t = 0; t < c.topic_centers.rows(); ++t) {
      rotation.apply(row(c.topic_centers, t));
      normalize_in_place(row(c.topic_centers, t));
    }
    for (std::size_t w = 0; w < c.vocab_size(); ++w) {
      rotation.apply(row(c.embeddings, w));
      normalize_in_place(row(c.embeddings, w));
    }
  }

  const auto n_novel = static_cast<std::size_t>(
      std::llround(resample_fraction * static_cast<double>(c.vocab_size())));
  std::vector<std::size_t> order(c.vocab_size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  c.novel.assign(c.vocab_size(), false);
  for (std::size_t i = 0; i < n_novel; ++i) {
    const std::size_t w = order[i];
    c.novel[w] = true;
    draw_member(c.topic_centers, c.topic_of[w], c.spec.topic_spread, rng, row(c.embeddings, w));
  }
  return c;
}

TopicSeparation topic_separation(const SyntheticCorpus& corpus) {
  double within = 0.0, across = 0.0;
  std::size_t n_within = 0, n_across = 0;
  for (std::size_t a = 0; a < corpus.vocab_size(); ++a) {
    for (std::size_t b = a + 1; b < corpus.vocab_size(); ++b) {
      const double s = cosine(row(corpus.embeddings, a), row(corpus.embeddings, b));
      if (corpus.topic_of[a] == corpus.topic_of[b]) {
        within += s;
        ++n_within;
      } else {
        across += s;
        ++n_across;
      }
    }
  }
  return {n_within ? within / static_cast<double>(n_within) : 0.0,
          n_across ? across / static_cast<double>(n_across) : 0.0};
}

Episode sample_oov_episode(const SyntheticCorpus& corpus, std::int64_t word_id, std::size_t k,
                           Rng& rng, std::string id) {
  check_word(corpus, word_id);
  if (k < 1) throw ValidationError("K must be >= 1");
  const auto word = static_cast<std::size_t>(word_id);
  const TokenSampler sampler(corpus, word);
  const double topic_prob =
      rng.uniform(corpus.spec.informativeness_min, corpus.spec.informativeness_max);
  Array contexts(Shape{k, corpus.dim()});
  std::size_t in_topic = 0;
  for (std::size_t i = 0; i < k; ++i) {
    in_topic += make_context(corpus, sampler, topic_prob, rng, row(contexts, i));
  }
  Episode ep;
  ep.id = std::move(id);
  ep.contexts = ContextSet(std::move(contexts));
  ep.target = corpus.embedding(word);
  ep.word_id = word_id;
  ep.informativeness =
      static_cast<double>(in_topic) / static_cast<double>(k * corpus.spec.context_len);
  return ep;
}

ChimeraEpisode make_chimera_episode(const SyntheticCorpus& corpus, std::int64_t pivot_id,
                                    std::int64_t compatible_id, std::size_t k, Rng& rng,
                                    std::string id) {
  check_word(corpus, pivot_id);
  check_word(corpus, compatible_id);
  if (pivot_id == compatible_id) throw ValidationError("pivot and compatible word must differ");
  if (k < 2 || k % 2 != 0) throw ValidationError("chimera K must be even and >= 2, got " + std::to_string(k));

  const auto pivot = static_cast<std::size_t>(pivot_id);
  const auto compatible = static_cast<std::size_t>(compatible_id);
  const TokenSampler pivot_sampler(corpus, pivot);
  const TokenSampler compatible_sampler(corpus, compatible);
  const double topic_prob =
      rng.uniform(corpus.spec.informativeness_min, corpus.spec.informativeness_max);

  ChimeraEpisode out;
  Array contexts(Shape{k, corpus.dim()});
  std::size_t in_topic = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const bool from_pivot = i < k / 2;
    in_topic += make_context(corpus, from_pivot ? pivot_sampler : compatible_sampler, topic_prob,
                             rng, row(contexts, i));
    out.context_words.push_back(from_pivot ? pivot_id : compatible_id);
  }

  std::vector<double> blend(corpus.dim());
  const auto ep = row(corpus.embeddings, pivot);
  const auto ec = row(corpus.embeddings, compatible);
  for (std::size_t j = 0; j < blend.size(); ++j) blend[j] = ep[j] + ec[j];
  normalize_in_place(blend);

  // Candidates ranked by similarity to the blend; one probe per rank band.
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t w = 0; w < corpus.vocab_size(); ++w) {
    if (w == pivot || w == compatible) continue;
    ranked.emplace_back(cosine(blend, row(corpus.embeddings, w)), w);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  static constexpr double kBands[kProbesPerChimera + 1] = {0.0, 0.02, 0.08, 0.2, 0.4, 0.7, 1.0};
  const std::size_t n = ranked.size();
  out.probes = Array(Shape{kProbesPerChimera, corpus.dim()});
  std::size_t prev = 0;
  for (std::size_t b = 0; b < kProbesPerChimera; ++b) {
    std::size_t lo = std::max(prev, static_cast<std::size_t>(kBands[b] * static_cast<double>(n)));
    std::size_t hi = static_cast<std::size_t>(kBands[b + 1] * static_cast<double>(n));
    hi = std::min(n, std::max(hi, lo + 1));
    if (lo >= n) throw ValidationError("vocabulary too small for six distinct probes");
    const std::size_t pick = lo + rng.uniform_index(hi - lo);
    prev = pick + 1;
    const std::size_t w = ranked[pick].second;
    out.probe_ids.push_back(static_cast<std::int64_t>(w));
    out.gold.push_back(ranked[pick].first);
    const auto e = row(corpus.embeddings, w);
    std::copy(e.begin(), e.end(), row(out.probes, b).begin());
  }

  out.episode.id = std::move(id);
  out.episode.contexts = ContextSet(std::move(contexts));
  out.episode.target = Array::vector(std::move(blend));
  out.episode.word_id = pivot_id;
  out.episode.informativeness =
      static_cast<double>(in_topic) / static_cast<double>(k * corpus.spec.context_len);
  out.pivot_id = pivot_id;
  out.compatible_id = compatible_id;
  return out;
}

Task make_corpus_task(const SyntheticCorpus& corpus, std::vector<std::size_t> words,
                      const RegressorConfig& model, const EpisodeSamplerOptions& options,
                      std::string id) {
  if (words.empty()) throw ValidationError("corpus task needs at least one word");
  if (options.batch_size == 0 || options.k_choices.empty()) {
    throw ValidationError("corpus task needs batch_size >= 1 and at least one K");
  }
  if (model.embedding_dim != corpus.dim()) {
    throw ShapeError("model embedding_dim " + std::to_string(model.embedding_dim) +
                     " does not match corpus dim " + std::to_string(corpus.dim()));
  }
  auto shared_corpus = std::make_shared<const SyntheticCorpus>(corpus);
  auto shared_words = std::make_shared<const std::vector<std::size_t>>(std::move(words));
  Task task;
  task.id = std::move(id);
  auto sampler = [shared_corpus, shared_words, options](Rng& rng) -> Batch {
    EpisodeBatch batch;
    batch.reserve(options.batch_size);
    for (std::size_t i = 0; i < options.batch_size; ++i) {
      const std::size_t w = (*shared_words)[rng.uniform_index(shared_words->size())];
      const std::size_t k = options.k_choices[rng.uniform_index(options.k_choices.size())];
      batch.push_back(sample_oov_episode(*shared_corpus, static_cast<std::int64_t>(w), k, rng));
    }
    return batch;
  };
  task.sample_support = sampler;
  task.sample_query = sampler;
  task.loss = [model](const ParameterVector& theta, const Batch& batch) {
    return embedding_batch_loss(model, theta, std::get<EpisodeBatch>(batch));
  };
  return task;
}

std::vector<ChimeraEpisode> make_chimera_benchmark(const SyntheticCorpus& corpus,
                                                   const std::vector<std::size_t>& pivot_pool,
                                                   std::size_t count, std::size_t k,
                                                   std::uint64_t seed) {
  if (pivot_pool.empty()) throw ValidationError("empty pivot pool");
  if (count == 0) throw ValidationError("benchmark needs at least one episode");
  // Pairs come from the seed alone; contexts from (seed, k).
  Rng pair_rng = Rng(seed).split(0x70616972ULL);
  Rng context_rng = Rng(seed).split(k);
  std::vector<ChimeraEpisode> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t pivot = pivot_pool[pair_rng.uniform_index(pivot_pool.size())];
    const auto near = nearest_words(corpus, pivot, 10);
    const std::size_t compatible = near[pair_rng.uniform_index(near.size())];
    out.push_back(make_chimera_episode(corpus, static_cast<std::int64_t>(pivot),
                                       static_cast<std::int64_t>(compatible), k, context_rng,
                                       "chimera-" + std::to_string(i)));
  }
  return out;
}

}  // namespace metaleap
