#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metaleap/array.hpp"

namespace metaleap {

/// K context vectors (rows of a K x d matrix), each already the mean of its
/// token embeddings.
class ContextSet {
 public:
  ContextSet() = default;
  /// Validates K >= 1, equal dimension and finiteness.
  explicit ContextSet(Array contexts);
  static ContextSet from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t count() const noexcept { return matrix_.rows(); }
  std::size_t dim() const noexcept { return matrix_.cols(); }
  const Array& matrix() const noexcept { return matrix_; }

 private:
  Array matrix_{Shape{0, 0}};
};

/// One few-shot instance: contexts plus (optionally) the embedding to recover.
struct Episode {
  std::string id;
  ContextSet contexts;
  std::optional<Array> target;
  std::int64_t word_id = -1;
  /// Fraction of in-topic tokens across the contexts; absent for ingested data.
  std::optional<double> informativeness;

  std::size_t k() const noexcept { return contexts.count(); }
};

inline constexpr std::size_t kProbesPerChimera = 6;

/// Chimera-style evaluation instance: an episode plus probe vectors and gold
/// similarity scores, one per probe.
struct ChimeraEpisode {
  Episode episode;
  std::vector<std::int64_t> probe_ids;
  /// Probe vectors, one per row.
  Array probes{Shape{0, 0}};
  std::vector<double> gold;
  /// Word each context was generated around (pivot or compatible).
  std::vector<std::int64_t> context_words;
  std::int64_t pivot_id = -1;
  std::int64_t compatible_id = -1;
};

}  // namespace metaleap
