#include "metaleap/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "metaleap/error.hpp"

namespace metaleap {

namespace {

std::string format_double(double v) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

double read_double(const std::string& token, const std::string& where) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || p != token.data() + token.size()) {
    throw ValidationError("checkpoint: bad value '" + token + "' in " + where);
  }
  return v;
}

std::size_t read_size(const std::string& token, const std::string& where) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || p != token.data() + token.size()) {
    throw ValidationError("checkpoint: bad integer '" + token + "' in " + where);
  }
  return v;
}

std::map<std::string, std::string> config_fields(const RegressorConfig& c) {
  return {{"embedding_dim", std::to_string(c.embedding_dim)},
          {"hidden_dim", std::to_string(c.hidden_dim)},
          {"aggregator", to_string(c.aggregator)},
          {"hidden_layers", std::to_string(c.hidden_layers)},
          {"activation", to_string(c.activation)}};
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  const RegressorConfig& c = checkpoint.config;
  out << kCheckpointMagic << '\n';
  out << "config embedding_dim=" << c.embedding_dim << " hidden_dim=" << c.hidden_dim
      << " aggregator=" << to_string(c.aggregator) << " hidden_layers=" << c.hidden_layers
      << " activation=" << to_string(c.activation) << '\n';
  const ParameterVector& theta = checkpoint.theta;
  for (std::size_t i = 0; i < theta.num_segments(); ++i) {
    const Array& a = theta.var(i).value();
    out << theta.names()[i] << ' ' << a.shape().size();
    for (std::size_t d : a.shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(a.data()[j]);
    }
    out << '\n';
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, checkpoint);
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    throw ValidationError("checkpoint: missing " + std::string(kCheckpointMagic) + " header");
  }
  Checkpoint cp;
  if (!std::getline(in, line) || line.rfind("config", 0) != 0) {
    throw ValidationError("checkpoint: missing config line");
  }
  {
    std::istringstream ss(line.substr(6));
    std::string kv;
    while (ss >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ValidationError("checkpoint: bad config entry '" + kv + "'");
      const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
      if (key == "embedding_dim") cp.config.embedding_dim = read_size(value, key);
      else if (key == "hidden_dim") cp.config.hidden_dim = read_size(value, key);
      else if (key == "aggregator") cp.config.aggregator = parse_aggregator(value);
      else if (key == "hidden_layers") cp.config.hidden_layers = read_size(value, key);
      else if (key == "activation") cp.config.activation = parse_activation(value);
      else throw ValidationError("checkpoint: unknown config entry '" + key + "'");
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream header(line);
    std::string name, tok;
    header >> name >> tok;
    if (name.empty() || tok.empty()) throw ValidationError("checkpoint: bad segment header '" + line + "'");
    const std::size_t ndim = read_size(tok, name);
    Shape shape;
    for (std::size_t i = 0; i < ndim; ++i) {
      if (!(header >> tok)) throw ValidationError("checkpoint: truncated shape for '" + name + "'");
      shape.push_back(read_size(tok, name));
    }
    if (header >> tok) throw ValidationError("checkpoint: trailing data in header of '" + name + "'");
    std::string values;
    if (!std::getline(in, values)) throw ValidationError("checkpoint: missing values for '" + name + "'");
    std::vector<double> data;
    std::istringstream vs(values);
    while (vs >> tok) data.push_back(read_double(tok, name));
    if (data.size() != shape_size(shape)) {
      throw ValidationError("checkpoint: segment '" + name + "' has " + std::to_string(data.size()) +
                            " values for shape " + shape_to_string(shape));
    }
    cp.theta.add(name, Array(shape, std::move(data)));
  }
  return cp;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

std::vector<std::string> config_differences(const RegressorConfig& a, const RegressorConfig& b) {
  std::vector<std::string> out;
  const auto fa = config_fields(a), fb = config_fields(b);
  for (const auto& [key, value] : fa) {
    if (fb.at(key) != value) out.push_back(key + " (" + value + " vs " + fb.at(key) + ")");
  }
  return out;
}

}  // namespace metaleap
