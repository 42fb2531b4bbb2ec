#pragma once

// Process and measurement models for homography tracking with a rate gyro.
//
// The state is (H, Gamma): H maps the current camera view onto the reference
// view, Gamma is the trace-free translational flow term. With the camera's
// scaled velocity s_a = r_dot / d held constant the state obeys
//
//   H_dot = H (skew(w) + Gamma),   Gamma_dot = [Gamma, skew(w)].
//
// Errors follow the right-invariant convention
//
//   exp(wedge(dxi)) = H_mean H_true^-1,   wedge(dgamma) = Gamma_true - Gamma_mean,
//
// stacked as the 16-vector (dxi, dgamma). Process noise is stacked as
// (gyro noise in R^3, model noise in R^8).

#include "hest/sl3.hpp"

#include <Eigen/Core>

#include <vector>

namespace hest {

using Vector16d = Eigen::Matrix<double, 16, 1>;
using Matrix16d = Eigen::Matrix<double, 16, 16>;
using StateCovariance = Matrix16d;
using Matrix16x11d = Eigen::Matrix<double, 16, 11>;
using Matrix11d = Eigen::Matrix<double, 11, 11>;
using Matrix83d = Eigen::Matrix<double, 8, 3>;
using Matrix2x16d = Eigen::Matrix<double, 2, 16>;

struct FilterState {
  SL3 H;
  AlgebraMatrix Gamma = AlgebraMatrix::Zero();  // 1/s
  double t = 0.0;                               // s
};

struct GyroSample {
  double t = 0.0;                                // s
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();  // rad/s, body frame
};

struct CameraIntrinsics {
  double fu = 600.0;
  double fv = 600.0;
  double cu = 320.0;
  double cv = 240.0;

  Eigen::Matrix3d matrix() const;
  /// Throws ConfigError unless both focal lengths are positive.
  void validate() const;
};

struct FeatureCorrespondence {
  int id = 0;
  Eigen::Vector3d p_ref = Eigen::Vector3d::UnitZ();  // normalized, reference view
  Eigen::Vector2d y_pix = Eigen::Vector2d::Zero();   // pixels, current view
};

/// Correspondences observed at one camera timestamp; empty while occluded.
struct FeatureFrame {
  double t = 0.0;
  std::vector<FeatureCorrespondence> correspondences;
};

struct NoiseConfig {
  double sigma_g = 0.01;    // gyro noise PSD root, rad/s/sqrt(Hz)
  double sigma_r = 1.0;     // pixel noise std, px
  double sigma_m2 = 1e-7;   // model-confidence PSD on Gamma, 1/s^2 scale

  void validate() const;
};

/// Camera b relative to the reference camera a viewing a plane.
struct PlanePose {
  Eigen::Matrix3d C_ab = Eigen::Matrix3d::Identity();
  Eigen::Vector3d r_a_ba = Eigen::Vector3d::Zero();   // m, resolved in a
  Eigen::Vector3d n_b = -Eigen::Vector3d::UnitZ();    // unit normal, resolved in b
  double d_b = 1.0;                                   // m, camera-to-plane distance
};

struct ProcessJacobians {
  Matrix16d A;
  Matrix16x11d L;
};

struct DiscreteProcess {
  Matrix16d Phi;
  Matrix16d Qd;
};

enum class DiscretizationMethod { kVanLoan, kFirstOrder };

/// project_sl3(C_ab - r_a_ba n_b^T / d_b). Throws DegeneratePoseError when the
/// bracketed matrix is singular or orientation-reversing.
SL3 homography_from_pose(const PlanePose& pose);

/// -(v n^T)/d + (n^T v)/(3d) I. Throws DomainError for d <= 0.
AlgebraMatrix gamma_from_velocity(const Eigen::Vector3d& v_b, const Eigen::Vector3d& n_b, double d_b);

/// Constant 8x3 matrix with wedge(B w) == skew(w).
Matrix83d b_projection();

/// One RK4 step of the process model with the rate held at `omega`, then
/// re-projection of H onto SL(3) and of Gamma onto trace-free matrices.
FilterState propagate_state(const FilterState& state, const Eigen::Vector3d& omega, double dt);

ProcessJacobians linearize_process(const FilterState& state, const Eigen::Vector3d& omega);

/// Continuous PSD of the stacked noise vector: diag(sigma_g^2 I3, sigma_m2 I8).
Matrix11d process_noise_psd(const NoiseConfig& noise);

DiscreteProcess discretize(const Matrix16d& A, const Matrix16x11d& L, const Matrix11d& Qc, double dt,
                           DiscretizationMethod method = DiscretizationMethod::kVanLoan);

/// Pixel (fu x/z + cu, fv y/z + cv) of r = H^-1 p_ref. Throws BehindCameraError
/// when z <= 1e-9.
Eigen::Vector2d predict_pixel(const FilterState& state, const Eigen::Vector3d& p_ref, const CameraIntrinsics& K);

/// Jacobian of predict_pixel() with respect to the 16-dim error, taken under
/// H = exp(-wedge(dxi)) H_mean. Throws like predict_pixel().
Matrix2x16d measurement_jacobian(const FilterState& state, const Eigen::Vector3d& p_ref, const CameraIntrinsics& K);

/// Error of `mean` relative to `truth` in the convention described above.
Vector16d state_error(const FilterState& mean, const FilterState& truth, const LogOptions& log = {});

/// The state whose error relative to `mean` is `delta`:
/// H = exp(-wedge(dxi)) H_mean, Gamma = Gamma_mean + wedge(dgamma).
FilterState retract(const FilterState& mean, const Vector16d& delta);

}  // namespace hest
