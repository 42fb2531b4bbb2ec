#pragma once

#include "hest/sl3.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace hest {

/// r_k reported for a step whose error could not be evaluated.
inline constexpr double kDivergenceSentinel = 1e3;

struct HomographyError {
  double r = 0.0;
  bool diverged = false;
};

struct StepRecord {
  double t = 0.0;
  /// NaN when no truth is available.
  double r_k = 0.0;
  double nees = 0.0;
  std::vector<double> mode_weights;
  /// Trace of the homography block of the covariance.
  double cov_trace = 0.0;
  bool diverged = false;
};

struct TrialReport {
  std::vector<StepRecord> steps;
  double mean_r = 0.0;
  double nees_in_band_fraction = 0.0;
  bool diverged = false;
  bool has_truth = true;
};

struct AggregateSummary {
  std::size_t n_runs = 0;
  /// Mean and standard deviation across runs of the time-averaged r_k.
  double mean_r = 0.0;
  double std_r = 0.0;
  std::vector<double> step_t;
  /// Cross-run mean NEES at each step.
  std::vector<double> mean_nees;
  double band_lo = 0.0;
  double band_hi = 0.0;
  double nees_in_band_fraction = 0.0;
  std::size_t diverged_runs = 0;
};

/// ||vee(log(h_hat h_true^-1))||; kDivergenceSentinel with the flag set when
/// the logarithm fails or the error exceeds the sentinel.
HomographyError homography_error(const SL3& h_hat, const SL3& h_true);

/// xi^T P^-1 xi. Throws SingularCovarianceError when P is not positive
/// definite.
double nees(const AlgebraVector& xi, const Matrix8d& p_hh);

/// Two-sided band for the mean of n_runs NEES values with `dof` degrees of
/// freedom each: quantiles of chi2(dof n_runs) / n_runs at (1 -+ confidence)/2.
std::pair<double, double> chi2_band(int dof, int n_runs, double confidence);

/// Fills mean_r, nees_in_band_fraction (single-run band) and the divergence
/// flag from report.steps.
void finalize_trial(TrialReport& report, double confidence = 0.9973);

/// Cross-run statistics; every run must have the same number of steps.
AggregateSummary aggregate(std::span<const TrialReport> runs, double confidence = 0.9973);

/// (observer - imm) / observer.
double percent_diff(double observer, double imm);

}  // namespace hest
