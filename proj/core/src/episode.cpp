#include "metaleap/episode.hpp"

#include "metaleap/error.hpp"

namespace metaleap {

ContextSet::ContextSet(Array contexts) : matrix_(std::move(contexts)) {
  if (matrix_.rank() != 2 || matrix_.rows() == 0 || matrix_.cols() == 0) {
    throw ShapeError("context set must be a non-empty K x d matrix, got " +
                     shape_to_string(matrix_.shape()));
  }
  if (!matrix_.all_finite()) throw NumericError("context set contains non-finite values");
}

ContextSet ContextSet::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ShapeError("context set needs at least one context");
  const std::size_t d = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * d);
  for (const auto& r : rows) {
    if (r.size() != d) {
      throw ShapeError("context dimensions differ: " + std::to_string(d) + " vs " +
                       std::to_string(r.size()));
    }
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return ContextSet(Array::matrix(rows.size(), d, std::move(flat)));
}

}  // namespace metaleap
