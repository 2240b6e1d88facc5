#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metaleap/gradcheck.hpp"
#include "metaleap/metalearn.hpp"
#include "metaleap/parameters.hpp"

namespace metaleap {

/// L(theta) = 1/2 |theta|^2 on every batch.
Task quadratic_task(std::string id = "quadratic");

/// Scalar parameter vector {"theta": value}.
ParameterVector scalar_theta(double value);

/// A smooth random loss and the point to differentiate it at.
struct GradientCase {
  std::string name;
  ScalarObjective loss;
  ParameterVector theta;
};
/// Mean squared error of a random small tanh MLP (sizes vary with `index`).
GradientCase random_mlp_case(std::uint64_t seed, std::size_t index);
/// Cosine embedding loss of a randomly initialized regressor; even indices
/// use the mean aggregator, odd ones attention.
GradientCase random_regressor_case(std::uint64_t seed, std::size_t index);

/// |analytic - numeric| / |numeric| over the whole gradient vector.
double normwise_gradient_error(const GradientCase& c, double step);

/// Worst relative error of the MAML meta-gradient against central differences
/// of the unrolled objective on a random 2-layer MLP regression task pair.
double maml_finite_difference_error(std::uint64_t seed, std::size_t inner_steps);

/// Worst relative error of the accumulated Leap gradient against central
/// differences of the frozen-target pull-forward objective.
double leap_finite_difference_error(std::uint64_t seed, std::size_t inner_steps);

struct SelftestCheck {
  std::string name;
  /// Absolute or relative error, depending on the check.
  double error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return error < tolerance; }
};

/// Finite-difference suites and hand-computed oracles.
std::vector<SelftestCheck> run_selftest(std::size_t gradient_cases = 20);

}  // namespace metaleap
