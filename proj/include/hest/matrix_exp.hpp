#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>

namespace hest {

/// Matrix exponential by scaling and squaring around a Taylor series.
///
/// The argument is scaled so its 1-norm is at most 1/2, the series is summed
/// until the next term falls below machine epsilon relative to the partial
/// sum, and the result is squared back. A zero matrix yields the identity
/// exactly.
template <typename Derived>
typename Derived::PlainObject expm(const Eigen::MatrixBase<Derived>& a) {
  using Plain = typename Derived::PlainObject;
  constexpr double kTargetNorm = 0.5;
  constexpr int kMaxTerms = 40;

  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > kTargetNorm) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / kTargetNorm)));
  }
  const Plain scaled = a / std::ldexp(1.0, squarings);

  Plain result = Plain::Identity(a.rows(), a.cols());
  Plain term = result;
  for (int k = 1; k <= kMaxTerms; ++k) {
    term = (term * scaled) / static_cast<double>(k);
    result += term;
    const double term_norm = term.cwiseAbs().maxCoeff();
    if (term_norm <= std::numeric_limits<double>::epsilon() * 1e-2 * result.cwiseAbs().maxCoeff()) {
      break;
    }
  }
  for (int i = 0; i < squarings; ++i) {
    result = (result * result).eval();
  }
  return result;
}

}  // namespace hest
