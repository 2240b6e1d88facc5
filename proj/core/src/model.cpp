#include "metaleap/model.hpp"

#include <cmath>

#include "metaleap/error.hpp"
#include "metaleap/rng.hpp"

namespace metaleap {

namespace {

Var activate(Activation a, const Var& x) {
  return a == Activation::kTanh ? ops::tanh(x) : ops::relu(x);
}

Array glorot(std::size_t fan_in, std::size_t fan_out, Shape shape, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Array out(std::move(shape));
  for (double& v : out.data()) v = rng.uniform(-bound, bound);
  return out;
}

void add_mlp_params(const MlpConfig& c, const std::string& prefix, Rng& rng,
                    ParameterVector& theta) {
  std::size_t in = c.input_dim;
  for (std::size_t layer = 0; layer <= c.hidden_layers; ++layer) {
    const std::size_t out = layer == c.hidden_layers ? c.output_dim : c.hidden_dim;
    const std::string name = prefix + "." + std::to_string(layer);
    theta.add(name + ".w", glorot(in, out, Shape{in, out}, rng));
    theta.add(name + ".b", Array(Shape{out}, 0.0));
    in = out;
  }
}

void require_positive(std::size_t v, const char* what) {
  if (v == 0) throw ValidationError(std::string(what) + " must be >= 1");
}

Var to_row(const Var& v) { return ops::reshape(v, Shape{1, v.size()}); }

// Rowwise inner products of two n x m matrices, as an n x 1 column.
Var row_dots(const Var& a, const Var& b) {
  const std::size_t m = a.shape()[1];
  return ops::matmul(ops::mul(a, b), Var::constant(Array(Shape{m, 1}, 1.0)));
}

}  // namespace

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ValidationError("unknown activation '" + name + "' (expected tanh or relu)");
}

Aggregator parse_aggregator(const std::string& name) {
  if (name == "mean") return Aggregator::kMean;
  if (name == "attention") return Aggregator::kAttention;
  throw ValidationError("unknown aggregator '" + name + "' (expected mean or attention)");
}

std::string to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "relu"; }
std::string to_string(Aggregator a) { return a == Aggregator::kMean ? "mean" : "attention"; }

void MlpConfig::validate() const {
  require_positive(input_dim, "mlp input_dim");
  require_positive(hidden_dim, "mlp hidden_dim");
  require_positive(output_dim, "mlp output_dim");
  require_positive(hidden_layers, "mlp hidden_layers");
}

void RegressorConfig::validate() const {
  require_positive(embedding_dim, "embedding_dim");
  require_positive(hidden_dim, "hidden_dim");
  require_positive(hidden_layers, "hidden_layers");
}

MlpConfig RegressorConfig::head() const {
  MlpConfig m;
  m.input_dim = aggregator == Aggregator::kMean ? embedding_dim : hidden_dim;
  m.hidden_dim = hidden_dim;
  m.output_dim = embedding_dim;
  m.hidden_layers = hidden_layers;
  m.activation = activation;
  return m;
}

ParameterVector init_params(const MlpConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParameterVector theta;
  add_mlp_params(config, "mlp", rng, theta);
  return theta;
}

ParameterVector init_params(const RegressorConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParameterVector theta;
  if (config.aggregator == Aggregator::kAttention) {
    const std::size_t d = config.embedding_dim, h = config.hidden_dim;
    theta.add("attn.proj.w", glorot(d, h, Shape{d, h}, rng));
    theta.add("attn.proj.b", Array(Shape{h}, 0.0));
    theta.add("attn.query", glorot(h, 1, Shape{h}, rng));
  }
  add_mlp_params(config.head(), "mlp", rng, theta);
  return theta;
}

Var mlp_forward(const MlpConfig& config, const ParameterVector& theta, const Var& inputs,
                const std::string& prefix) {
  if (inputs.shape().size() != 2 || inputs.shape()[1] != config.input_dim) {
    throw ShapeError("mlp_forward: expected inputs of shape [n, " +
                     std::to_string(config.input_dim) + "], got " +
                     shape_to_string(inputs.shape()));
  }
  Var h = inputs;
  for (std::size_t layer = 0; layer <= config.hidden_layers; ++layer) {
    const std::string name = prefix + "." + std::to_string(layer);
    h = ops::add_row(ops::matmul(h, theta[name + ".w"]), theta[name + ".b"]);
    if (layer < config.hidden_layers) h = activate(config.activation, h);
  }
  return h;
}

Var predict(const RegressorConfig& config, const ParameterVector& theta,
            const ContextSet& contexts) {
  return predict(config, theta, Var::constant(contexts.matrix()));
}

Var predict(const RegressorConfig& config, const ParameterVector& theta, const Var& contexts) {
  const Shape& s = contexts.shape();
  if (s.size() != 2 || s[0] == 0 || s[1] != config.embedding_dim) {
    throw ShapeError("predict: expected contexts of shape [K, " +
                     std::to_string(config.embedding_dim) + "], got " + shape_to_string(s));
  }
  Var pooled;
  if (config.aggregator == Aggregator::kMean) {
    pooled = ops::mean_rows(contexts);
  } else {
    const std::size_t h = config.hidden_dim;
    Var projected = ops::add_row(ops::matmul(contexts, theta["attn.proj.w"]), theta["attn.proj.b"]);
    Var query = ops::reshape(theta["attn.query"], Shape{h, 1});
    Var scores = ops::scale(ops::matmul(projected, query), 1.0 / std::sqrt(static_cast<double>(h)));
    Var weights = ops::softmax(ops::reshape(scores, Shape{1, s[0]}));
    pooled = ops::reshape(ops::matmul(weights, projected), Shape{h});
  }
  Var out = mlp_forward(config.head(), theta, to_row(pooled));
  return ops::reshape(out, Shape{config.embedding_dim});
}

Var embedding_loss(const RegressorConfig& config, const ParameterVector& theta,
                   const Episode& episode) {
  if (!episode.target) throw ValidationError("episode '" + episode.id + "' has no target");
  return ops::cosine_distance(predict(config, theta, episode.contexts),
                              Var::constant(*episode.target));
}

Var embedding_batch_loss(const RegressorConfig& config, const ParameterVector& theta,
                         std::span<const Episode> episodes) {
  if (episodes.empty()) throw ValidationError("embedding loss over an empty batch");
  if (config.aggregator == Aggregator::kAttention) {
    Var total = embedding_loss(config, theta, episodes[0]);
    for (std::size_t i = 1; i < episodes.size(); ++i) {
      total = ops::add(total, embedding_loss(config, theta, episodes[i]));
    }
    return ops::scale(total, 1.0 / static_cast<double>(episodes.size()));
  }

  // Mean aggregation commutes with batching: stack the per-episode context
  // means and run the head once.
  const std::size_t n = episodes.size(), d = config.embedding_dim;
  Array pooled(Shape{n, d});
  Array targets(Shape{n, d});
  for (std::size_t e = 0; e < n; ++e) {
    const Episode& ep = episodes[e];
    if (!ep.target) throw ValidationError("episode '" + ep.id + "' has no target");
    const Array& c = ep.contexts.matrix();
    if (c.cols() != d || ep.target->size() != d) {
      throw ShapeError("embedding_batch_loss: episode '" + ep.id + "' has dimension " +
                       std::to_string(c.cols()) + ", model expects " + std::to_string(d));
    }
    const Array mean = ops::mean_rows(Var::constant(c)).value();
    for (std::size_t j = 0; j < d; ++j) {
      pooled.at(e, j) = mean[j];
      targets.at(e, j) = (*ep.target)[j];
    }
  }
  Var pred = mlp_forward(config.head(), theta, Var::constant(std::move(pooled)));
  Var tgt = Var::constant(std::move(targets));
  Var pp = row_dots(pred, pred);
  Var tt = row_dots(tgt, tgt);
  for (std::size_t e = 0; e < n; ++e) {
    if (pp.value()[e] == 0.0 || tt.value()[e] == 0.0) {
      throw DegenerateVectorError("episode '" + episodes[e].id + "'");
    }
  }
  Var cos = ops::div(row_dots(pred, tgt), ops::sqrt(ops::mul(pp, tt)));
  return ops::add_scalar(ops::neg(ops::mean(cos)), 1.0);
}

Var mse_loss(const MlpConfig& config, const ParameterVector& theta, const Array& inputs,
             const Array& targets) {
  if (inputs.size() == 0 || targets.size() == 0) throw ValidationError("mse over an empty batch");
  if (inputs.rank() != 2 || targets.rank() != 2 || inputs.rows() != targets.rows()) {
    throw ShapeError("mse_loss: shape mismatch " + shape_to_string(inputs.shape()) + " vs " +
                     shape_to_string(targets.shape()));
  }
  Var pred = mlp_forward(config, theta, Var::constant(inputs));
  return ops::mean(ops::square(ops::sub(pred, Var::constant(targets))));
}

}  // namespace metaleap
