#pragma once

#include <functional>
#include <span>
#include <vector>

#include "metaleap/parameters.hpp"

namespace metaleap {

using ScalarObjective = std::function<Var(const ParameterVector&)>;

/// |a - b| / max(|a|, |b|, 1e-12).
double relative_error(double a, double b) noexcept;

/// Worst componentwise relative error between two equally sized vectors.
double max_relative_error(std::span<const double> a, std::span<const double> b);

/// Central differences of `f` at `theta`, one component at a time.
std::vector<double> central_difference_gradient(const ScalarObjective& f,
                                                const ParameterVector& theta, double step);

/// Compares the reverse-mode gradient of `f` at `theta` to central
/// differences and returns the worst relative error.
double finite_difference_check(const ScalarObjective& f, const ParameterVector& theta,
                               double step = 1e-5);

}  // namespace metaleap
