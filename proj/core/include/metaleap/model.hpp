#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "metaleap/autodiff.hpp"
#include "metaleap/episode.hpp"
#include "metaleap/parameters.hpp"

namespace metaleap {

enum class Activation { kTanh, kRelu };
enum class Aggregator { kMean, kAttention };

Activation parse_activation(const std::string& name);
Aggregator parse_aggregator(const std::string& name);
std::string to_string(Activation a);
std::string to_string(Aggregator a);

struct MlpConfig {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 40;
  std::size_t output_dim = 1;
  std::size_t hidden_layers = 2;
  Activation activation = Activation::kRelu;

  void validate() const;
};

/// Configuration of the few-shot embedding regressor.
struct RegressorConfig {
  std::size_t embedding_dim = 16;
  std::size_t hidden_dim = 32;
  Aggregator aggregator = Aggregator::kMean;
  std::size_t hidden_layers = 1;
  Activation activation = Activation::kTanh;

  void validate() const;
  /// The MLP applied after context aggregation.
  MlpConfig head() const;
  friend bool operator==(const RegressorConfig&, const RegressorConfig&) = default;
};

/// Glorot-uniform weights, zero biases; identical for identical seeds.
ParameterVector init_params(const MlpConfig& config, std::uint64_t seed);
ParameterVector init_params(const RegressorConfig& config, std::uint64_t seed);

/// Batched MLP forward: rows of `inputs` (n x input_dim) -> n x output_dim.
/// Segments are looked up as `<prefix>.<layer>.w` / `.b`.
Var mlp_forward(const MlpConfig& config, const ParameterVector& theta, const Var& inputs,
                const std::string& prefix = "mlp");

/// Predicted embedding (length d) for a context set.
Var predict(const RegressorConfig& config, const ParameterVector& theta, const ContextSet& contexts);
/// Same, with the context matrix supplied as a graph node (differentiable w.r.t. it).
Var predict(const RegressorConfig& config, const ParameterVector& theta, const Var& contexts);

/// Cosine distance between the prediction and the episode's target, in [0, 2].
Var embedding_loss(const RegressorConfig& config, const ParameterVector& theta,
                   const Episode& episode);
/// Mean embedding loss over a batch of episodes.
Var embedding_batch_loss(const RegressorConfig& config, const ParameterVector& theta,
                         std::span<const Episode> episodes);

/// Mean squared error of the MLP over a batch (inputs n x in, targets n x out).
Var mse_loss(const MlpConfig& config, const ParameterVector& theta, const Array& inputs,
             const Array& targets);

}  // namespace metaleap
