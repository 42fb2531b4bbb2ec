#pragma once

#include "hest/models.hpp"

#include <span>
#include <vector>

namespace hest {

/// Scaling of the pixel residual fed to the robust weight.
enum class RobustScale {
  /// r^2 = e^T (G P G^T + R)^-1 e, with P the covariance of the unweighted
  /// fit.
  kInnovation,
  /// r^2 = e^T R^-1 e.
  kPixelNoise,
};

struct IekfConfig {
  NoiseConfig noise;
  int max_gn_iters = 5;
  double gn_tol = 1e-8;
  /// Cap on the homography part of one Gauss-Newton step.
  double max_step = 0.5;
  double robust_c = 9.5;
  /// Apply SC/DCS weights to pixel residuals.
  bool robust = true;
  RobustScale robust_scale = RobustScale::kInnovation;
  /// Fold the robust weights into R when computing the measurement likelihood.
  /// Off by default: inflating R hides a mismatched motion model from the IMM.
  bool robust_likelihood = false;
  DiscretizationMethod discretization = DiscretizationMethod::kVanLoan;

  void validate() const;
};

struct BeliefState {
  FilterState mean;
  StateCovariance cov = StateCovariance::Identity();
};

struct CorrectionResult {
  BeliefState belief;
  /// Gaussian log-likelihood of the frame under the prior; 0 when no
  /// feature could be used.
  double log_likelihood = 0.0;
  int iterations = 0;
  int used_features = 0;
  double final_step_norm = 0.0;
  bool all_behind_camera = false;
};

/// Constant-rate interval of a gyro stream.
struct GyroSegment {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  double dt = 0.0;
};

/// SC/DCS weight: 1 below the threshold, 4c^2/(c + r2)^2 at or above it.
double scdcs_weight(double r2, double c);

BeliefState ekf_predict(const BeliefState& belief, const GyroSample& gyro, double dt, const IekfConfig& cfg);

/// Iterated correction: Gauss-Newton on the prior-plus-pixels least squares
/// cost, then (if cfg.robust) SC/DCS reweighting started from that fit, each
/// stage up to cfg.max_gn_iters iterations. Retraction H <- exp(-wedge(dxi)) H.
CorrectionResult ekf_correct(const BeliefState& belief, const FeatureFrame& frame, const CameraIntrinsics& K,
                             const IekfConfig& cfg);

/// Splits [t_from, t_to) into zero-order-hold intervals of `stream`. Times
/// before the first sample use the first sample's rate.
std::vector<GyroSegment> gyro_segments(std::span<const GyroSample> stream, double t_from, double t_to);

/// Asserts the covariance invariants: finite, symmetric to 1e-12 of its
/// scale and eigenvalues >= -1e-10 (relative). Returns false on violation.
bool covariance_is_valid(const StateCovariance& cov);

}  // namespace hest
