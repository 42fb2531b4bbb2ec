#pragma once

// Interacting multiple model filter over a bank of iterated EKFs that differ
// only in the model-confidence PSD sigma_m2.

#include "hest/filters.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace hest {

enum class ImmOutput { kFused, kMaxWeight };

struct ImmConfig {
  std::vector<double> mode_sigmas;
  /// Row-stochastic: transition(i, j) = p_ij.
  Eigen::MatrixXd transition;
  IekfConfig base;
  ImmOutput output = ImmOutput::kFused;

  /// A single mode is accepted here so that a one-mode bank can be compared
  /// against the plain filter; front ends require at least two.
  void validate() const;
  /// base with noise.sigma_m2 replaced by mode_sigmas[mode].
  IekfConfig mode_config(std::size_t mode) const;
};

struct ImmState {
  std::vector<BeliefState> modes;
  Eigen::VectorXd weights;
};

struct ImmDiagnostics {
  bool uniform_fallback = false;
  bool mixing_skipped = false;
  bool likelihood_underflow = false;
  bool any_behind_camera = false;
};

struct ImmStepResult {
  ImmState state;
  ImmDiagnostics diagnostics;
  std::vector<double> log_likelihoods;
};

/// Every mode starts at `initial` with uniform weights.
ImmState imm_init(const BeliefState& initial, const ImmConfig& cfg);

/// mu(i, j) proportional to p_ij w_i, each column normalized to 1.
Eigen::MatrixXd imm_interaction(const ImmState& state, const ImmConfig& cfg, ImmDiagnostics* diag = nullptr);

/// Gaussian mixture of `modes` with probabilities `column`, expressed in the
/// tangent coordinates of modes[anchor] and mapped back to a single belief.
/// Throws LogDomainError when two means are too far apart.
BeliefState mix_about(std::span<const BeliefState> modes, const Eigen::VectorXd& column, std::size_t anchor);

/// Target mode j receives mix_about(modes, mu.col(j), j). On a log-domain
/// failure the state is returned unmixed with diag->mixing_skipped set.
ImmState imm_mix(const ImmState& state, const Eigen::MatrixXd& mu, ImmDiagnostics* diag = nullptr);

/// Interaction, mixing, per-mode prediction over `segments`, per-mode
/// correction and the weight update w_i ~ L_i sum_j w_j p_ji.
ImmStepResult imm_step(const ImmState& state, std::span<const GyroSegment> segments, const FeatureFrame& frame,
                       const CameraIntrinsics& K, const ImmConfig& cfg);

/// Mixture of all modes about the highest-weight mode, weighted by w.
BeliefState imm_fused_estimate(const ImmState& state);

/// The estimate selected by cfg.output.
BeliefState imm_output(const ImmState& state, const ImmConfig& cfg);

}  // namespace hest
