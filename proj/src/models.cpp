#include "hest/models.hpp"

#include "hest/errors.hpp"
#include "hest/matrix_exp.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hest {

namespace {

struct Derivative {
  Eigen::Matrix3d H;
  Eigen::Matrix3d Gamma;
};

Derivative process_rate(const Eigen::Matrix3d& H, const Eigen::Matrix3d& Gamma, const Eigen::Matrix3d& omega_x) {
  return {H * (omega_x + Gamma), Gamma * omega_x - omega_x * Gamma};
}

}  // namespace

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fu, 0.0, cu,
       0.0, fv, cv,
       0.0, 0.0, 1.0;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fu > 0.0) || !(fv > 0.0)) {
    throw ConfigError("camera intrinsics: focal lengths must be positive");
  }
}

void NoiseConfig::validate() const {
  if (!(sigma_g > 0.0) || !(sigma_r > 0.0) || !(sigma_m2 > 0.0)) {
    throw ConfigError("noise config: sigma_g, sigma_r and sigma_m2 must be positive");
  }
}

SL3 homography_from_pose(const PlanePose& pose) {
  if (!(pose.d_b > 0.0)) {
    throw DegeneratePoseError("homography_from_pose: camera is not in front of the plane");
  }
  const Eigen::Matrix3d m = pose.C_ab - pose.r_a_ba * pose.n_b.transpose() / pose.d_b;
  const double det = m.determinant();
  if (!(det > 1e-12)) {
    std::ostringstream msg;
    msg << "homography_from_pose: degenerate pose, det " << det;
    throw DegeneratePoseError(msg.str());
  }
  return project_sl3(m);
}

AlgebraMatrix gamma_from_velocity(const Eigen::Vector3d& v_b, const Eigen::Vector3d& n_b, double d_b) {
  if (!(d_b > 0.0)) {
    throw DomainError("gamma_from_velocity: plane distance must be positive");
  }
  return -(v_b * n_b.transpose()) / d_b + (n_b.dot(v_b) / (3.0 * d_b)) * Eigen::Matrix3d::Identity();
}

Matrix83d b_projection() {
  Matrix83d b = Matrix83d::Zero();
  b(0, 1) = 1.0;
  b(1, 0) = -1.0;
  b(2, 2) = 1.0;
  b(6, 1) = -1.0;
  b(7, 0) = 1.0;
  return b;
}

FilterState propagate_state(const FilterState& state, const Eigen::Vector3d& omega, double dt) {
  const Eigen::Matrix3d wx = skew(omega);
  const Eigen::Matrix3d& h0 = state.H.matrix();
  const Eigen::Matrix3d& g0 = state.Gamma;

  const Derivative k1 = process_rate(h0, g0, wx);
  const Derivative k2 = process_rate(h0 + 0.5 * dt * k1.H, g0 + 0.5 * dt * k1.Gamma, wx);
  const Derivative k3 = process_rate(h0 + 0.5 * dt * k2.H, g0 + 0.5 * dt * k2.Gamma, wx);
  const Derivative k4 = process_rate(h0 + dt * k3.H, g0 + dt * k3.Gamma, wx);

  const Eigen::Matrix3d h1 = h0 + (dt / 6.0) * (k1.H + 2.0 * k2.H + 2.0 * k3.H + k4.H);
  Eigen::Matrix3d g1 = g0 + (dt / 6.0) * (k1.Gamma + 2.0 * k2.Gamma + 2.0 * k3.Gamma + k4.Gamma);
  g1 -= (g1.trace() / 3.0) * Eigen::Matrix3d::Identity();

  return {project_sl3(h1), g1, state.t + dt};
}

ProcessJacobians linearize_process(const FilterState& state, const Eigen::Vector3d& omega) {
  const Matrix83d B = b_projection();
  const Matrix8d ad_h = adjoint_matrix(state.H);
  const Matrix8d ad_u = little_adjoint(B * omega);
  const Matrix8d ad_gamma = little_adjoint(vee(state.Gamma));

  ProcessJacobians j;
  j.A.setZero();
  j.A.block<8, 8>(0, 8) = -ad_h;
  j.A.block<8, 8>(8, 8) = -ad_u;

  j.L.setZero();
  j.L.block<8, 3>(0, 0) = ad_h * B;
  j.L.block<8, 3>(8, 0) = -ad_gamma * B;
  j.L.block<8, 8>(8, 3) = Matrix8d::Identity();
  return j;
}

Matrix11d process_noise_psd(const NoiseConfig& noise) {
  Matrix11d q = Matrix11d::Zero();
  q.diagonal().head<3>().setConstant(noise.sigma_g * noise.sigma_g);
  q.diagonal().tail<8>().setConstant(noise.sigma_m2);
  return q;
}

DiscreteProcess discretize(const Matrix16d& A, const Matrix16x11d& L, const Matrix11d& Qc, double dt,
                           DiscretizationMethod method) {
  const Matrix16d q = L * Qc * L.transpose();
  DiscreteProcess out;
  if (method == DiscretizationMethod::kFirstOrder) {
    out.Phi = Matrix16d::Identity() + A * dt;
    out.Qd = q * dt;
  } else {
    // Van Loan: exp([[-A, Q], [0, A^T]] dt) = [[., Phi^-1 Qd], [0, Phi^T]].
    // The series is summed blockwise since the argument is block upper
    // triangular.
    Matrix16d a = -A * dt;
    Matrix16d b = q * dt;
    Matrix16d c = A.transpose() * dt;
    const Eigen::Matrix<double, 1, 16> upper = a.cwiseAbs().colwise().sum();
    const Eigen::Matrix<double, 1, 16> lower = b.cwiseAbs().colwise().sum() + c.cwiseAbs().colwise().sum();
    const double norm = std::max(upper.maxCoeff(), lower.maxCoeff());
    int squarings = 0;
    if (norm > 0.5) {
      squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    }
    const double scale = std::ldexp(1.0, -squarings);
    a *= scale;
    b *= scale;
    c *= scale;

    // With a = -A dt the lower-right term (A^T dt)^k / k! is the transpose of
    // (-1)^k times the upper-left term.
    Matrix16d x = Matrix16d::Identity();
    Matrix16d y = Matrix16d::Zero();
    Matrix16d zt = Matrix16d::Identity();
    Matrix16d tx = x;
    Matrix16d ty = y;
    for (int k = 1; k <= 40; ++k) {
      const double inv_k = 1.0 / static_cast<double>(k);
      // lazyProduct does not guard against aliasing.
      const Matrix16d next_y = (tx.lazyProduct(b) + ty.lazyProduct(c)) * inv_k;
      const Matrix16d next_x = tx.lazyProduct(a) * inv_k;
      ty = next_y;
      tx = next_x;
      x += tx;
      y += ty;
      if (k % 2 == 0) {
        zt += tx;
      } else {
        zt -= tx;
      }
      const double term = std::max(tx.cwiseAbs().maxCoeff(), ty.cwiseAbs().maxCoeff());
      const double total = std::max(x.cwiseAbs().maxCoeff(), y.cwiseAbs().maxCoeff());
      if (term <= std::numeric_limits<double>::epsilon() * 1e-2 * total) {
        break;
      }
    }
    Matrix16d z = zt.transpose();
    for (int i = 0; i < squarings; ++i) {
      y = (x * y + y * z).eval();
      x = (x * x).eval();
      z = (z * z).eval();
    }
    out.Phi = z.transpose();
    out.Qd = out.Phi * y;
  }
  out.Qd = (0.5 * (out.Qd + out.Qd.transpose())).eval();
  return out;
}

Eigen::Vector2d predict_pixel(const FilterState& state, const Eigen::Vector3d& p_ref, const CameraIntrinsics& K) {
  const Eigen::Vector3d r = state.H.matrix().inverse() * p_ref;
  if (!(r.z() > 1e-9)) {
    throw BehindCameraError("predict_pixel: feature is behind the camera");
  }
  return {K.fu * r.x() / r.z() + K.cu, K.fv * r.y() / r.z() + K.cv};
}

Matrix2x16d measurement_jacobian(const FilterState& state, const Eigen::Vector3d& p_ref, const CameraIntrinsics& K) {
  const Eigen::Matrix3d h_inv = state.H.matrix().inverse();
  const Eigen::Vector3d r = h_inv * p_ref;
  if (!(r.z() > 1e-9)) {
    throw BehindCameraError("measurement_jacobian: feature is behind the camera");
  }
  const double x = r.x();
  const double y = r.y();
  const double z = r.z();
  Eigen::Matrix<double, 2, 3> proj;
  proj << K.fu, 0.0, -K.fu * x / z,
          0.0, K.fv, -K.fv * y / z;
  proj /= z;

  // H^-1 = H_mean^-1 exp(wedge(dxi)), so dr/ddxi = H_mean^-1 odot(p_ref).
  Matrix2x16d g = Matrix2x16d::Zero();
  g.leftCols<8>() = proj * h_inv * odot(p_ref);
  return g;
}

Vector16d state_error(const FilterState& mean, const FilterState& truth, const LogOptions& log) {
  Vector16d e;
  e.head<8>() = log_vee(mean.H * truth.H.inverse(), log);
  e.tail<8>() = vee(truth.Gamma - mean.Gamma);
  return e;
}

FilterState retract(const FilterState& mean, const Vector16d& delta) {
  FilterState out;
  out.H = exp_sl3(-wedge(delta.head<8>())) * mean.H;
  out.Gamma = mean.Gamma + wedge(delta.tail<8>());
  out.t = mean.t;
  return out;
}

}  // namespace hest
