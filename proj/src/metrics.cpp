#include "hest/metrics.hpp"

#include "hest/errors.hpp"

#include <Eigen/Cholesky>
#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <limits>
#include <tuple>

namespace hest {

HomographyError homography_error(const SL3& h_hat, const SL3& h_true) {
  HomographyError e;
  try {
    e.r = log_vee(h_hat * h_true.inverse(), LogOptions{0.0}).norm();
  } catch (const Error&) {
    return {kDivergenceSentinel, true};
  }
  if (!std::isfinite(e.r) || e.r >= kDivergenceSentinel) {
    return {kDivergenceSentinel, true};
  }
  return e;
}

double nees(const AlgebraVector& xi, const Matrix8d& p_hh) {
  const Eigen::LLT<Matrix8d> llt(p_hh);
  if (llt.info() != Eigen::Success) {
    throw SingularCovarianceError("nees: covariance block is not positive definite");
  }
  return xi.dot(llt.solve(xi));
}

std::pair<double, double> chi2_band(int dof, int n_runs, double confidence) {
  if (dof < 1 || n_runs < 1) {
    throw DomainError("chi2_band: dof and n_runs must be at least 1");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw DomainError("chi2_band: confidence must lie in (0, 1)");
  }
  const boost::math::chi_squared dist(static_cast<double>(dof) * n_runs);
  const double n = static_cast<double>(n_runs);
  return {boost::math::quantile(dist, 0.5 * (1.0 - confidence)) / n,
          boost::math::quantile(dist, 0.5 * (1.0 + confidence)) / n};
}

void finalize_trial(TrialReport& report, double confidence) {
  const auto [lo, hi] = chi2_band(8, 1, confidence);
  double sum_r = 0.0;
  std::size_t in_band = 0;
  std::size_t counted = 0;
  report.diverged = false;
  for (const StepRecord& s : report.steps) {
    report.diverged = report.diverged || s.diverged;
    if (std::isnan(s.r_k)) {
      continue;
    }
    sum_r += s.r_k;
    ++counted;
    if (s.nees >= lo && s.nees <= hi) {
      ++in_band;
    }
  }
  report.has_truth = counted > 0 || report.steps.empty();
  if (counted == 0) {
    report.mean_r = std::numeric_limits<double>::quiet_NaN();
    report.nees_in_band_fraction = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  report.mean_r = sum_r / static_cast<double>(counted);
  report.nees_in_band_fraction = static_cast<double>(in_band) / static_cast<double>(counted);
}

AggregateSummary aggregate(std::span<const TrialReport> runs, double confidence) {
  if (runs.empty()) {
    throw DomainError("aggregate: at least one run is required");
  }
  AggregateSummary out;
  out.n_runs = runs.size();
  const std::size_t n_steps = runs.front().steps.size();
  for (const TrialReport& r : runs) {
    if (r.steps.size() != n_steps) {
      throw DomainError("aggregate: runs have different numbers of steps");
    }
    out.mean_r += r.mean_r;
    out.diverged_runs += r.diverged ? 1 : 0;
  }
  const double n = static_cast<double>(runs.size());
  out.mean_r /= n;
  double var = 0.0;
  for (const TrialReport& r : runs) {
    var += (r.mean_r - out.mean_r) * (r.mean_r - out.mean_r);
  }
  out.std_r = runs.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;

  std::tie(out.band_lo, out.band_hi) = chi2_band(8, static_cast<int>(runs.size()), confidence);
  out.step_t.resize(n_steps);
  out.mean_nees.resize(n_steps);
  std::size_t in_band = 0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    out.step_t[k] = runs.front().steps[k].t;
    double sum = 0.0;
    std::size_t finite = 0;
    for (const TrialReport& r : runs) {
      if (std::isfinite(r.steps[k].nees)) {
        sum += r.steps[k].nees;
        ++finite;
      }
    }
    // Steps of diverged runs carry no NEES; they count against the band.
    out.mean_nees[k] = finite == runs.size() ? sum / n : std::numeric_limits<double>::quiet_NaN();
    if (out.mean_nees[k] >= out.band_lo && out.mean_nees[k] <= out.band_hi) {
      ++in_band;
    }
  }
  out.nees_in_band_fraction = n_steps > 0 ? static_cast<double>(in_band) / static_cast<double>(n_steps) : 0.0;
  return out;
}

double percent_diff(double observer, double imm) {
  if (observer == 0.0) {
    throw DomainError("percent_diff: observer error is zero");
  }
  return (observer - imm) / observer;
}

}  // namespace hest
