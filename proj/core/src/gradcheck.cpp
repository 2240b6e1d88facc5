#include "metaleap/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "metaleap/error.hpp"

namespace metaleap {

double relative_error(double a, double b) noexcept {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / denom;
}

double max_relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i]));
  return worst;
}

std::vector<double> central_difference_gradient(const ScalarObjective& f,
                                                const ParameterVector& theta, double step) {
  if (!(step > 0.0)) throw ValidationError("finite difference step must be > 0");
  NoRecordGuard no_record;
  std::vector<double> flat = theta.flatten();
  std::vector<double> grad(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double saved = flat[i];
    flat[i] = saved + step;
    const double up = f(ParameterVector::unflatten(theta, flat)).item();
    flat[i] = saved - step;
    const double down = f(ParameterVector::unflatten(theta, flat)).item();
    flat[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double finite_difference_check(const ScalarObjective& f, const ParameterVector& theta,
                               double step) {
  const ParameterVector leaves = theta.as_leaves();
  const std::vector<double> analytic = gradient(f(leaves), leaves).flatten();
  const std::vector<double> numeric = central_difference_gradient(f, theta, step);
  return max_relative_error(analytic, numeric);
}

}  // namespace metaleap
