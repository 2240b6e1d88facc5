#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metaleap/metalearn.hpp"
#include "metaleap/model.hpp"
#include "metaleap/taskgen.hpp"

namespace metaleap {

/// Flat `key=value` settings with dotted keys. Lines starting with '#' are
/// comments.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  /// Applies a `key=value` override.
  void set_assignment(const std::string& assignment);
  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct PretrainSettings {
  std::size_t iterations = 1500;
  double learning_rate = 0.5;
  std::size_t batch_size = 16;
  std::size_t log_every = 50;
};

struct AdaptSettings {
  std::size_t meta_iters = 100;
  std::size_t batch_size = 16;
};

struct EvalSettings {
  std::vector<std::size_t> k_shots{2, 4, 6};
  std::size_t episodes = 50;
  std::uint64_t seed = 7;
};

struct ShiftSettings {
  double strength = 0.5;
  double resample_fraction = 0.2;
  std::uint64_t seed = 11;
};

struct AnalyzeSettings {
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 13;
};

/// Plain-SGD step sizes for the synthetic corpora. Inner steps are shared by
/// all algorithms and MAML's meta step is a tenth of Leap's; steps and batch
/// sizes keep the per-algorithm defaults of MetaConfig.
inline constexpr double kSyntheticInnerRate = 0.1;
inline constexpr double kSyntheticLeapMetaRate = 1e-2;

/// Everything one experiment needs; built from a KeyValueConfig.
struct ExperimentConfig {
  RegressorConfig model;
  /// Overrides applied on top of MetaConfig::defaults_for, per algorithm.
  std::map<Algorithm, MetaConfig> meta;
  CorpusSpec corpus;
  std::uint64_t corpus_seed = 5;
  ShiftSettings shift;
  PretrainSettings pretrain;
  AdaptSettings adapt;
  EvalSettings eval;
  AnalyzeSettings analyze;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::string output_dir = "out";

  ExperimentConfig();
  const MetaConfig& meta_for(Algorithm a) const { return meta.at(a); }

  /// Unknown keys and malformed values raise ValidationError.
  static ExperimentConfig from(const KeyValueConfig& kv);
  void validate() const;
};

}  // namespace metaleap
