#include "metaleap/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "metaleap/error.hpp"

namespace metaleap {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ValidationError("config '" + key + "': expected a finite number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ValidationError("config '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::vector<std::uint64_t> parse_uint_list(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_uint(key, trim(item)));
  if (out.empty()) throw ValidationError("config '" + key + "': empty list");
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

template <class T>
Setter size_field(T ExperimentConfig::*group, std::size_t T::*field) {
  return [=](ExperimentConfig& c, const std::string& k, const std::string& v) {
    (c.*group).*field = static_cast<std::size_t>(parse_uint(k, v));
  };
}

template <class T>
Setter double_field(T ExperimentConfig::*group, double T::*field) {
  return [=](ExperimentConfig& c, const std::string& k, const std::string& v) {
    (c.*group).*field = parse_double(k, v);
  };
}

template <class T>
Setter seed_field(T ExperimentConfig::*group, std::uint64_t T::*field) {
  return [=](ExperimentConfig& c, const std::string& k, const std::string& v) {
    (c.*group).*field = parse_uint(k, v);
  };
}

void set_meta_field(MetaConfig& m, const std::string& field, const std::string& key,
                    const std::string& v) {
  if (field == "alpha") m.alpha = parse_double(key, v);
  else if (field == "beta") m.beta = parse_double(key, v);
  else if (field == "inner_steps") m.inner_steps = parse_uint(key, v);
  else if (field == "meta_batch") m.meta_batch = parse_uint(key, v);
  else if (field == "epsilon_norm") m.epsilon_norm = parse_double(key, v);
  else if (field == "clip_norm") m.clip_norm = parse_double(key, v);
  else throw ValidationError("unknown config key '" + key + "'");
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    using C = ExperimentConfig;
    std::map<std::string, Setter> t;
    t["model.embedding_dim"] = size_field(&C::model, &RegressorConfig::embedding_dim);
    t["model.hidden_dim"] = size_field(&C::model, &RegressorConfig::hidden_dim);
    t["model.hidden_layers"] = size_field(&C::model, &RegressorConfig::hidden_layers);
    t["model.aggregator"] = [](C& c, const std::string&, const std::string& v) {
      c.model.aggregator = parse_aggregator(v);
    };
    t["model.activation"] = [](C& c, const std::string&, const std::string& v) {
      c.model.activation = parse_activation(v);
    };

    t["corpus.vocab_size"] = size_field(&C::corpus, &CorpusSpec::vocab_size);
    t["corpus.dim"] = size_field(&C::corpus, &CorpusSpec::dim);
    t["corpus.n_topics"] = size_field(&C::corpus, &CorpusSpec::n_topics);
    t["corpus.topic_spread"] = double_field(&C::corpus, &CorpusSpec::topic_spread);
    t["corpus.context_len"] = size_field(&C::corpus, &CorpusSpec::context_len);
    t["corpus.context_noise_sd"] = double_field(&C::corpus, &CorpusSpec::context_noise_sd);
    t["corpus.zipf_s"] = double_field(&C::corpus, &CorpusSpec::zipf_s);
    t["corpus.self_token_prob"] = double_field(&C::corpus, &CorpusSpec::self_token_prob);
    t["corpus.informativeness_min"] = double_field(&C::corpus, &CorpusSpec::informativeness_min);
    t["corpus.informativeness_max"] = double_field(&C::corpus, &CorpusSpec::informativeness_max);
    t["corpus.seed"] = [](C& c, const std::string& k, const std::string& v) {
      c.corpus_seed = parse_uint(k, v);
    };

    t["shift.strength"] = double_field(&C::shift, &ShiftSettings::strength);
    t["shift.resample_fraction"] = double_field(&C::shift, &ShiftSettings::resample_fraction);
    t["shift.seed"] = seed_field(&C::shift, &ShiftSettings::seed);

    t["pretrain.iterations"] = size_field(&C::pretrain, &PretrainSettings::iterations);
    t["pretrain.learning_rate"] = double_field(&C::pretrain, &PretrainSettings::learning_rate);
    t["pretrain.batch_size"] = size_field(&C::pretrain, &PretrainSettings::batch_size);
    t["pretrain.log_every"] = size_field(&C::pretrain, &PretrainSettings::log_every);

    t["adapt.meta_iters"] = size_field(&C::adapt, &AdaptSettings::meta_iters);
    t["adapt.batch_size"] = size_field(&C::adapt, &AdaptSettings::batch_size);

    t["eval.episodes"] = size_field(&C::eval, &EvalSettings::episodes);
    t["eval.seed"] = seed_field(&C::eval, &EvalSettings::seed);
    t["eval.k_shots"] = [](C& c, const std::string& k, const std::string& v) {
      c.eval.k_shots.clear();
      for (auto x : parse_uint_list(k, v)) c.eval.k_shots.push_back(static_cast<std::size_t>(x));
    };

    t["analyze.bootstrap"] = size_field(&C::analyze, &AnalyzeSettings::bootstrap);
    t["analyze.seed"] = seed_field(&C::analyze, &AnalyzeSettings::seed);

    t["seeds"] = [](C& c, const std::string& k, const std::string& v) {
      c.seeds = parse_uint_list(k, v);
    };
    t["output_dir"] = [](C& c, const std::string&, const std::string& v) { c.output_dir = v; };
    return t;
  }();
  return table;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) {
      throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
    }
    cfg.values_[key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KeyValueConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("expected key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

ExperimentConfig::ExperimentConfig() {
  for (Algorithm a : {Algorithm::kMaml, Algorithm::kFomaml, Algorithm::kLeap}) {
    MetaConfig m = MetaConfig::defaults_for(a);
    m.alpha = kSyntheticInnerRate;
    m.beta = a == Algorithm::kLeap ? kSyntheticLeapMetaRate : kSyntheticLeapMetaRate / 10.0;
    meta[a] = m;
  }
}

ExperimentConfig ExperimentConfig::from(const KeyValueConfig& kv) {
  ExperimentConfig c;
  for (const auto& [key, value] : kv.values()) {
    if (key.rfind("meta.", 0) == 0) {
      for (auto& [alg, m] : c.meta) set_meta_field(m, key.substr(5), key, value);
    }
  }
  for (const auto& [key, value] : kv.values()) {
    if (key.rfind("meta.", 0) == 0) continue;
    const auto dot = key.find('.');
    const std::string head = dot == std::string::npos ? key : key.substr(0, dot);
    if (head == "maml" || head == "fomaml" || head == "leap") {
      set_meta_field(c.meta.at(parse_algorithm(head)), key.substr(dot + 1), key, value);
      continue;
    }
    const auto it = setters().find(key);
    if (it == setters().end()) throw ValidationError("unknown config key '" + key + "'");
    it->second(c, key, value);
  }
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  model.validate();
  corpus.validate();
  if (corpus.dim != model.embedding_dim) {
    throw ValidationError("corpus.dim (" + std::to_string(corpus.dim) +
                          ") must equal model.embedding_dim (" +
                          std::to_string(model.embedding_dim) + ")");
  }
  for (const auto& [alg, m] : meta) m.validate();
  if (seeds.empty()) throw ValidationError("seeds must be non-empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ValidationError("seeds must be distinct");
  }
  if (eval.k_shots.empty()) throw ValidationError("eval.k_shots must be non-empty");
  for (std::size_t k : eval.k_shots) {
    if (k < 2 || k % 2 != 0) {
      throw ValidationError("eval.k_shots entries must be even and >= 2, got " + std::to_string(k));
    }
  }
  if (eval.episodes < 2) throw ValidationError("eval.episodes must be at least 2");
  if (pretrain.batch_size == 0 || adapt.batch_size == 0) {
    throw ValidationError("batch sizes must be positive");
  }
  if (!(pretrain.learning_rate > 0.0)) throw ValidationError("pretrain.learning_rate must be > 0");
  if (pretrain.log_every == 0) throw ValidationError("pretrain.log_every must be positive");
  if (adapt.meta_iters == 0) throw ValidationError("adapt.meta_iters must be positive");
  if (!(shift.resample_fraction >= 0.0 && shift.resample_fraction < 1.0)) {
    throw ValidationError("shift.resample_fraction must be in [0, 1)");
  }
  if (output_dir.empty()) throw ValidationError("output_dir must be non-empty");
}

}  // namespace metaleap
