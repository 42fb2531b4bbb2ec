#include "hest/imm.hpp"

#include "hest/errors.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <sstream>

namespace hest {

namespace {

Eigen::Index max_weight_index(const Eigen::VectorXd& w) {
  Eigen::Index best = 0;
  w.maxCoeff(&best);
  return best;
}

}  // namespace

void ImmConfig::validate() const {
  base.validate();
  const auto n = static_cast<Eigen::Index>(mode_sigmas.size());
  if (n < 1) {
    throw ConfigError("imm config: at least one mode is required");
  }
  for (double s : mode_sigmas) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw ConfigError("imm config: mode sigma_m2 values must be finite and non-negative");
    }
  }
  if (transition.rows() != n || transition.cols() != n) {
    std::ostringstream msg;
    msg << "imm config: transition matrix must be " << n << "x" << n;
    throw ConfigError(msg.str());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((transition.row(i).array() < 0.0).any() || !transition.row(i).allFinite()) {
      throw ConfigError("imm config: transition entries must be finite and non-negative");
    }
    if (std::abs(transition.row(i).sum() - 1.0) > 1e-12) {
      throw ConfigError("imm config: transition rows must sum to 1");
    }
  }
}

IekfConfig ImmConfig::mode_config(std::size_t mode) const {
  IekfConfig c = base;
  c.noise.sigma_m2 = mode_sigmas.at(mode);
  return c;
}

ImmState imm_init(const BeliefState& initial, const ImmConfig& cfg) {
  const std::size_t n = cfg.mode_sigmas.size();
  ImmState s;
  s.modes.assign(n, initial);
  s.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
  return s;
}

Eigen::MatrixXd imm_interaction(const ImmState& state, const ImmConfig& cfg, ImmDiagnostics* diag) {
  const Eigen::Index n = state.weights.size();
  Eigen::MatrixXd mu(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i, j) = cfg.transition(i, j) * state.weights(i);
      total += mu(i, j);
    }
    if (total > 0.0) {
      mu.col(j) /= total;
    } else {
      mu.col(j).setConstant(1.0 / static_cast<double>(n));
      if (diag != nullptr) {
        diag->uniform_fallback = true;
      }
    }
  }
  return mu;
}

BeliefState mix_about(std::span<const BeliefState> modes, const Eigen::VectorXd& column, std::size_t anchor) {
  const BeliefState& a = modes[anchor];
  const SL3 anchor_h = a.mean.H;

  std::vector<Vector16d> offsets(modes.size(), Vector16d::Zero());
  std::vector<Matrix16d> covs(modes.size());
  Vector16d mean = Vector16d::Zero();
  for (std::size_t j = 0; j < modes.size(); ++j) {
    const double c = column(static_cast<Eigen::Index>(j));
    if (c == 0.0) {
      continue;
    }
    covs[j] = modes[j].cov;
    if (j == anchor) {
      continue;
    }
    // Equal means give an exactly zero offset instead of log rounding noise.
    const AlgebraVector eps = modes[j].mean.H.matrix() == anchor_h.matrix()
                                  ? AlgebraVector::Zero()
                                  : log_vee(anchor_h * modes[j].mean.H.inverse());
    offsets[j].head<8>() = eps;
    offsets[j].tail<8>() = vee(modes[j].mean.Gamma - a.mean.Gamma);
    if (!eps.isZero(0.0)) {
      Matrix16d t = Matrix16d::Identity();
      t.topLeftCorner<8, 8>() = right_jacobian(eps).inverse();
      covs[j] = t * modes[j].cov * t.transpose();
    }
    mean += c * offsets[j];
  }

  Matrix16d cov = Matrix16d::Zero();
  for (std::size_t j = 0; j < modes.size(); ++j) {
    const double c = column(static_cast<Eigen::Index>(j));
    if (c == 0.0) {
      continue;
    }
    const Vector16d d = offsets[j] - mean;
    cov += c * (covs[j] + d * d.transpose());
  }

  BeliefState out;
  out.mean.t = a.mean.t;
  const AlgebraVector m_xi = mean.head<8>();
  out.mean.Gamma = a.mean.Gamma + wedge(mean.tail<8>());
  if (m_xi.isZero(0.0)) {
    out.mean.H = anchor_h;
    out.cov = cov;
  } else {
    out.mean.H = project_sl3((exp_sl3(-wedge(m_xi)) * anchor_h).matrix());
    Matrix16d t = Matrix16d::Identity();
    t.topLeftCorner<8, 8>() = right_jacobian(m_xi);
    out.cov = t * cov * t.transpose();
  }
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

ImmState imm_mix(const ImmState& state, const Eigen::MatrixXd& mu, ImmDiagnostics* diag) {
  ImmState out = state;
  try {
    for (std::size_t j = 0; j < state.modes.size(); ++j) {
      out.modes[j] = mix_about(state.modes, mu.col(static_cast<Eigen::Index>(j)), j);
    }
  } catch (const LogDomainError&) {
    if (diag != nullptr) {
      diag->mixing_skipped = true;
    }
    return state;
  }
  return out;
}

ImmStepResult imm_step(const ImmState& state, std::span<const GyroSegment> segments, const FeatureFrame& frame,
                       const CameraIntrinsics& K, const ImmConfig& cfg) {
  ImmStepResult result;
  const std::size_t n = state.modes.size();
  const Eigen::MatrixXd mu = imm_interaction(state, cfg, &result.diagnostics);
  ImmState mixed = imm_mix(state, mu, &result.diagnostics);

  result.log_likelihoods.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const IekfConfig mode_cfg = cfg.mode_config(i);
    BeliefState b = mixed.modes[i];
    for (const GyroSegment& seg : segments) {
      b = ekf_predict(b, GyroSample{b.mean.t, seg.omega}, seg.dt, mode_cfg);
    }
    const CorrectionResult corr = ekf_correct(b, frame, K, mode_cfg);
    result.diagnostics.any_behind_camera = result.diagnostics.any_behind_camera || corr.all_behind_camera;
    mixed.modes[i] = corr.belief;
    result.log_likelihoods[i] = corr.log_likelihood;
  }

  // Predicted mode probabilities c_i = sum_j w_j p_ji, then Bayes in the log domain.
  const Eigen::VectorXd predicted = cfg.transition.transpose() * state.weights;
  Eigen::VectorXd log_w(static_cast<Eigen::Index>(n));
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double ll = result.log_likelihoods[i];
    log_w(k) = (predicted(k) > 0.0 && !std::isnan(ll)) ? ll + std::log(predicted(k))
                                                       : -std::numeric_limits<double>::infinity();
    max_log = std::max(max_log, log_w(k));
  }
  if (!std::isfinite(max_log)) {
    result.diagnostics.likelihood_underflow = true;
    mixed.weights = state.weights;
  } else {
    // Scalar exp: Eigen's packet exp maps -inf to a denormal, not zero.
    Eigen::VectorXd w = (log_w.array() - max_log).unaryExpr([](double x) { return std::exp(x); });
    mixed.weights = w / w.sum();
  }
  result.state = std::move(mixed);
  return result;
}

BeliefState imm_fused_estimate(const ImmState& state) {
  return mix_about(state.modes, state.weights, static_cast<std::size_t>(max_weight_index(state.weights)));
}

BeliefState imm_output(const ImmState& state, const ImmConfig& cfg) {
  if (cfg.output == ImmOutput::kMaxWeight) {
    return state.modes[static_cast<std::size_t>(max_weight_index(state.weights))];
  }
  try {
    return imm_fused_estimate(state);
  } catch (const LogDomainError&) {
    return state.modes[static_cast<std::size_t>(max_weight_index(state.weights))];
  }
}

}  // namespace hest
