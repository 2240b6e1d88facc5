#include "metaleap/episode_io.hpp"

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>

#include <nlohmann/json.hpp>

#include "metaleap/error.hpp"

namespace metaleap {

namespace {

using nlohmann::json;

std::vector<double> vector_field(const json& v, const std::string& where) {
  if (!v.is_array()) throw ValidationError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (const json& x : v) {
    if (!x.is_number()) throw ValidationError(where + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

Array matrix_field(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw ValidationError(where + ": expected a non-empty list of vectors");
  std::vector<std::vector<double>> rows;
  for (const json& r : v) rows.push_back(vector_field(r, where));
  const std::size_t d = rows.front().size();
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != d) throw ValidationError(where + ": rows of unequal length");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Array::matrix(rows.size(), d, std::move(flat));
}

void check_dim(std::optional<std::size_t>& dim, std::size_t d, const std::string& where) {
  if (!dim) dim = d;
  if (*dim != d) {
    throw ValidationError(where + ": dimension " + std::to_string(d) + " disagrees with " +
                          std::to_string(*dim));
  }
}

}  // namespace

std::vector<ChimeraEpisode> read_episodes_jsonl(std::istream& in) {
  std::vector<ChimeraEpisode> out;
  std::optional<std::size_t> dim;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "episodes line " + std::to_string(lineno);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("word") || !obj["word"].is_string() ||
        !obj.contains("contexts")) {
      throw ValidationError(where + ": need \"word\" and \"contexts\"");
    }
    ChimeraEpisode ep;
    ep.episode.id = obj["word"].get<std::string>();
    Array contexts = matrix_field(obj["contexts"], where + " contexts");
    check_dim(dim, contexts.cols(), where);
    ep.episode.contexts = ContextSet(std::move(contexts));
    if (obj.contains("target") && !obj["target"].is_null()) {
      std::vector<double> t = vector_field(obj["target"], where + " target");
      check_dim(dim, t.size(), where);
      ep.episode.target = Array::vector(std::move(t));
    }
    if (obj.contains("informativeness") && !obj["informativeness"].is_null()) {
      if (!obj["informativeness"].is_number()) throw ValidationError(where + ": bad informativeness");
      ep.episode.informativeness = obj["informativeness"].get<double>();
    }
    const bool has_p = obj.contains("probes") && !obj["probes"].is_null();
    const bool has_g = obj.contains("gold") && !obj["gold"].is_null();
    if (has_p != has_g) throw ValidationError(where + ": probes and gold must both be present or both null");
    if (has_p) {
      ep.probes = matrix_field(obj["probes"], where + " probes");
      check_dim(dim, ep.probes.cols(), where);
      ep.gold = vector_field(obj["gold"], where + " gold");
      if (ep.gold.size() != ep.probes.rows()) {
        throw ValidationError(where + ": " + std::to_string(ep.probes.rows()) + " probes but " +
                              std::to_string(ep.gold.size()) + " gold scores");
      }
    }
    out.push_back(std::move(ep));
  }
  return out;
}

std::vector<ChimeraEpisode> load_episodes_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open episode file '" + path + "'");
  return read_episodes_jsonl(in);
}

void write_episodes_jsonl(std::ostream& out, const std::vector<ChimeraEpisode>& episodes) {
  auto rows = [](const Array& m) {
    json r = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m.at(i, j));
      r.push_back(std::move(row));
    }
    return r;
  };
  for (const ChimeraEpisode& ep : episodes) {
    json obj;
    obj["word"] = ep.episode.id;
    obj["contexts"] = rows(ep.episode.contexts.matrix());
    if (ep.episode.target) {
      const auto d = ep.episode.target->data();
      obj["target"] = std::vector<double>(d.begin(), d.end());
    } else {
      obj["target"] = nullptr;
    }
    obj["probes"] = has_probes(ep) ? rows(ep.probes) : json(nullptr);
    obj["gold"] = has_probes(ep) ? json(ep.gold) : json(nullptr);
    if (ep.episode.informativeness) obj["informativeness"] = *ep.episode.informativeness;
    out << obj.dump() << '\n';
  }
}

}  // namespace metaleap
