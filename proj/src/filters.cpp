#include "hest/filters.hpp"

#include "hest/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <array>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace hest {

namespace {

// The prior term compares the prior mean against iterates that may be far
// away on the first frame, so only the principal-log domain is enforced.
constexpr LogOptions kWideLog{0.0};

Matrix16d symmetrize(const Matrix16d& m) { return 0.5 * (m + m.transpose()); }

Matrix16d inverse_spd(const Matrix16d& m) {
  const Eigen::LDLT<Matrix16d> ldlt(m);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw SingularCovarianceError("covariance or information matrix is not positive definite");
  }
  return symmetrize(ldlt.solve(Matrix16d::Identity()));
}

struct NormalEquations {
  Matrix16d info;
  Vector16d rhs;
};

// Prior block of the normal equations about iterate `x`.
NormalEquations prior_terms(const FilterState& prior, const Matrix16d& prior_info, const FilterState& x,
                            bool at_prior) {
  NormalEquations ne;
  if (at_prior) {
    ne.info = prior_info;
    ne.rhs.setZero();
    return ne;
  }
  const Vector16d e0 = state_error(prior, x, kWideLog);
  Matrix16d jp = Matrix16d::Identity();
  JacobianOptions jopt;
  jopt.log = kWideLog;
  jp.topLeftCorner<8, 8>() = right_jacobian(e0.head<8>(), jopt).inverse();
  ne.info = jp.transpose() * prior_info * jp;
  ne.rhs = -jp.transpose() * prior_info * e0;
  return ne;
}

bool is_domain_failure(const Error& e) {
  return dynamic_cast<const LogDomainError*>(&e) != nullptr || dynamic_cast<const ProjectionError*>(&e) != nullptr;
}

}  // namespace

void IekfConfig::validate() const {
  noise.validate();
  if (max_gn_iters < 1) {
    throw ConfigError("iekf config: max_gn_iters must be at least 1");
  }
  if (!(robust_c > 0.0)) {
    throw ConfigError("iekf config: robust_c must be positive");
  }
  if (!(max_step > 0.0)) {
    throw ConfigError("iekf config: max_step must be positive");
  }
  if (!(gn_tol >= 0.0)) {
    throw ConfigError("iekf config: gn_tol must be non-negative");
  }
}

double scdcs_weight(double r2, double c) {
  if (r2 < c) {
    return 1.0;
  }
  const double denom = c + r2;
  return 4.0 * c * c / (denom * denom);
}

BeliefState ekf_predict(const BeliefState& belief, const GyroSample& gyro, double dt, const IekfConfig& cfg) {
  if (!(dt > 0.0)) {
    throw DomainError("ekf_predict: dt must be positive");
  }
  const ProcessJacobians jac = linearize_process(belief.mean, gyro.omega);
  const DiscreteProcess disc =
      discretize(jac.A, jac.L, process_noise_psd(cfg.noise), dt, cfg.discretization);

  BeliefState out;
  out.mean = propagate_state(belief.mean, gyro.omega, dt);
  out.cov = symmetrize(disc.Phi * belief.cov * disc.Phi.transpose() + disc.Qd);
  return out;
}

CorrectionResult ekf_correct(const BeliefState& belief, const FeatureFrame& frame, const CameraIntrinsics& K,
                             const IekfConfig& cfg) {
  CorrectionResult result;
  result.belief = belief;
  if (frame.correspondences.empty()) {
    return result;
  }

  std::vector<const FeatureCorrespondence*> usable;
  usable.reserve(frame.correspondences.size());
  for (const FeatureCorrespondence& c : frame.correspondences) {
    const Eigen::Vector3d r = belief.mean.H.matrix().inverse() * c.p_ref;
    if (r.z() > 1e-9) {
      usable.push_back(&c);
    }
  }
  if (usable.empty()) {
    result.all_behind_camera = true;
    return result;
  }
  // Canonical accumulation order, so the posterior does not depend on how
  // the frame lists its correspondences.
  std::sort(usable.begin(), usable.end(), [](const FeatureCorrespondence* a, const FeatureCorrespondence* b) {
    const std::array<double, 6> ka{a->p_ref.x(), a->p_ref.y(), a->p_ref.z(), a->y_pix.x(), a->y_pix.y(),
                                   static_cast<double>(a->id)};
    const std::array<double, 6> kb{b->p_ref.x(), b->p_ref.y(), b->p_ref.z(), b->y_pix.x(), b->y_pix.y(),
                                   static_cast<double>(b->id)};
    return ka < kb;
  });

  const double r_var = cfg.noise.sigma_r * cfg.noise.sigma_r;
  const double r_inv = 1.0 / r_var;
  const Matrix16d prior_info = inverse_spd(belief.cov);
  const auto n_usable = static_cast<Eigen::Index>(usable.size());

  // Normal equations about x. Without `scale` every weight is 1; otherwise
  // the robust residual of feature k is e^T (G scale G^T + R)^-1 e.
  struct Linearization {
    NormalEquations ne;
    Eigen::VectorXd weights;
  };
  auto linearize = [&](const FilterState& x, bool at_prior, const Matrix16d* scale) {
    Linearization lin;
    lin.ne = prior_terms(belief.mean, prior_info, x, at_prior);
    lin.weights = Eigen::VectorXd::Ones(n_usable);
    for (Eigen::Index k = 0; k < n_usable; ++k) {
      const FeatureCorrespondence* c = usable[static_cast<std::size_t>(k)];
      Eigen::Vector2d predicted;
      Matrix2x16d g;
      try {
        predicted = predict_pixel(x, c->p_ref, K);
        g = measurement_jacobian(x, c->p_ref, K);
      } catch (const BehindCameraError&) {
        continue;
      }
      const Eigen::Vector2d r = c->y_pix - predicted;
      double w = 1.0;
      if (scale != nullptr) {
        const Eigen::Matrix2d s = g * (*scale) * g.transpose() + r_var * Eigen::Matrix2d::Identity();
        w = scdcs_weight(r.dot(s.inverse() * r), cfg.robust_c);
      }
      lin.weights(k) = w;
      lin.ne.info.noalias() += (w * r_inv) * g.transpose() * g;
      lin.ne.rhs.noalias() += (w * r_inv) * g.transpose() * r;
    }
    return lin;
  };

  // Gauss-Newton from x. Steps are capped on the homography part and halved
  // when they leave the domain of the prior log.
  constexpr int kMaxHalvings = 20;
  auto gauss_newton = [&](FilterState& x, Linearization& lin, const Matrix16d* scale) {
    for (int it = 0; it < cfg.max_gn_iters; ++it) {
      const Vector16d delta = lin.ne.info.ldlt().solve(lin.ne.rhs);
      const double xi_norm = delta.head<8>().norm();
      double alpha = xi_norm > cfg.max_step ? cfg.max_step / xi_norm : 1.0;
      for (int h = 0;; ++h) {
        try {
          FilterState candidate = retract(x, alpha * delta);
          candidate.H = project_sl3(candidate.H.matrix());
          Linearization next = linearize(candidate, false, scale);
          x = std::move(candidate);
          lin = std::move(next);
          break;
        } catch (const Error& e) {
          if (!is_domain_failure(e) || h >= kMaxHalvings) {
            throw;
          }
          alpha *= 0.5;
        }
      }
      ++result.iterations;
      result.final_step_norm = alpha * delta.norm();
      if (result.final_step_norm < cfg.gn_tol) {
        break;
      }
    }
  };

  // Innovations at the prior for the likelihood.
  Eigen::VectorXd nu(2 * n_usable);
  Eigen::MatrixXd jac(2 * n_usable, 16);
  std::vector<Eigen::Index> rows;
  for (Eigen::Index k = 0; k < n_usable; ++k) {
    const FeatureCorrespondence* c = usable[static_cast<std::size_t>(k)];
    const auto m = static_cast<Eigen::Index>(rows.size());
    nu.segment<2>(2 * m) = c->y_pix - predict_pixel(belief.mean, c->p_ref, K);
    jac.middleRows<2>(2 * m) = measurement_jacobian(belief.mean, c->p_ref, K);
    rows.push_back(k);
  }
  result.used_features = static_cast<int>(rows.size());

  // Unweighted fit first; its covariance sets the scale of the robust
  // residuals, which is then held fixed while reweighting.
  FilterState x = belief.mean;
  Linearization lin = linearize(x, true, nullptr);
  gauss_newton(x, lin, nullptr);
  if (cfg.robust) {
    Matrix16d scale = Matrix16d::Zero();
    if (cfg.robust_scale == RobustScale::kInnovation) {
      scale = inverse_spd(lin.ne.info);
    }
    lin = linearize(x, result.iterations == 0, &scale);
    gauss_newton(x, lin, &scale);
  }

  {
    const Eigen::Index m = 2 * static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd s = jac.topRows(m) * belief.cov * jac.topRows(m).transpose();
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double w = cfg.robust_likelihood ? lin.weights(rows[k]) : 1.0;
      const auto d = static_cast<Eigen::Index>(2 * k);
      s(d, d) += r_var / w;
      s(d + 1, d + 1) += r_var / w;
    }
    const Eigen::VectorXd v = nu.head(m);
    const Eigen::LDLT<Eigen::MatrixXd> s_ldlt(s);
    const double log_det = s_ldlt.vectorD().array().log().sum();
    result.log_likelihood =
        -0.5 * (v.dot(s_ldlt.solve(v)) + log_det + static_cast<double>(m) * std::log(2.0 * std::numbers::pi));
  }

  result.belief.mean = x;
  result.belief.cov = inverse_spd(lin.ne.info);
  return result;
}

std::vector<GyroSegment> gyro_segments(std::span<const GyroSample> stream, double t_from, double t_to) {
  std::vector<GyroSegment> out;
  if (stream.empty() || !(t_to > t_from)) {
    return out;
  }
  constexpr double kMinDt = 1e-12;
  double t = t_from;
  if (t < stream.front().t) {
    const double end = std::min(stream.front().t, t_to);
    if (end - t > kMinDt) {
      out.push_back({stream.front().omega, end - t});
    }
    t = end;
  }
  // Last sample at or before t.
  auto it = std::upper_bound(stream.begin(), stream.end(), t,
                             [](double value, const GyroSample& s) { return value < s.t; });
  if (it != stream.begin()) {
    --it;
  }
  for (; it != stream.end() && t < t_to; ++it) {
    const auto next = std::next(it);
    const double end = next == stream.end() ? t_to : std::min(next->t, t_to);
    if (end - t > kMinDt) {
      out.push_back({it->omega, end - t});
      t = end;
    } else if (end > t) {
      t = end;
    }
  }
  return out;
}

bool covariance_is_valid(const StateCovariance& cov) {
  if (!cov.allFinite()) {
    return false;
  }
  const double scale = std::max(1e-300, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    return false;
  }
  const Eigen::SelfAdjointEigenSolver<StateCovariance> eig(cov, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -1e-10 * scale;
}

}  // namespace hest
