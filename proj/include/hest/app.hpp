#pragma once

// Run configuration, single-trial driver and Monte Carlo batches shared by
// the command-line front end and the acceptance suite.

#include "hest/dataset_io.hpp"
#include "hest/filters.hpp"
#include "hest/imm.hpp"
#include "hest/metrics.hpp"
#include "hest/sim.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hest {

enum class EstimatorKind { kEkfTight, kEkfLoose, kImm };

std::string to_string(EstimatorKind kind);
/// Accepts ekf_tight, ekf_loose and imm. Throws ConfigError.
EstimatorKind parse_estimator(std::string_view name);

struct RunConfig {
  EstimatorKind estimator = EstimatorKind::kEkfTight;
  /// One value for the EKFs, one per mode for the IMM.
  std::vector<double> sigma_m2 = {1e-7};
  Eigen::MatrixXd transition = Eigen::MatrixXd::Identity(1, 1);
  double sigma_g = 0.01;
  double sigma_r = 1.0;
  double robust_c = 9.5;
  bool robust = true;
  bool robust_likelihood = false;
  int max_gn_iters = 5;
  double gn_tol = 1e-8;
  DiscretizationMethod discretization = DiscretizationMethod::kVanLoan;
  ImmOutput imm_output = ImmOutput::kFused;
  /// Initial covariance p0 * I.
  double p0 = 0.1;
  /// Start at the true state instead of a sample from N(truth, p0 I).
  bool truth_init = false;
  std::uint64_t seed = 1;
  int n_monte_carlo = 1;
  double confidence = 0.9973;

  /// Defaults for `kind`: 1e-7 (tight), 1e-1 (loose), {1e-7, 1e-1} with a
  /// 0.9/0.1 transition matrix (imm).
  static RunConfig defaults_for(EstimatorKind kind);
  /// Throws ConfigError. An IMM needs at least two modes.
  void validate() const;
  IekfConfig iekf() const;
  ImmConfig imm() const;
};

/// Transition matrix with `stay` on the diagonal and the rest spread evenly.
Eigen::MatrixXd default_transition(std::size_t n_modes, double stay = 0.9);

/// Common interface over the EKF and the IMM.
class Estimator {
 public:
  Estimator(const RunConfig& cfg, const BeliefState& initial);

  void step(std::span<const GyroSegment> segments, const FeatureFrame& frame, const CameraIntrinsics& K);
  BeliefState output() const;
  /// {1} for the EKFs.
  std::vector<double> weights() const;
  const ImmState& imm_state() const { return imm_; }
  const ImmDiagnostics& last_diagnostics() const { return diag_; }

 private:
  RunConfig cfg_;
  IekfConfig iekf_;
  ImmConfig imm_cfg_;
  BeliefState ekf_;
  ImmState imm_;
  ImmDiagnostics diag_;
};

struct TrialOutput {
  TrialReport report;
  /// Output estimate after each frame.
  std::vector<BeliefState> estimates;
};

/// Initial belief: the truth at the first sample (perturbed unless
/// cfg.truth_init) or identity/zero when the dataset has no truth.
BeliefState initial_belief(const SimDataset& data, const RunConfig& cfg, std::uint64_t seed);

/// Runs one estimator over a dataset, recording a StepRecord after every
/// frame. A filter failure marks the trial diverged and fills the remaining
/// steps with the divergence sentinel.
TrialOutput run_trial(const SimDataset& data, const CameraIntrinsics& K, const RunConfig& cfg,
                      std::uint64_t seed);

/// splitmix64 of master and index; documented seed derivation for run i.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

struct MonteCarloResult {
  RunConfig config;
  std::vector<TrialReport> runs;
  AggregateSummary summary;
};

/// n_runs trials of every config on `truth`. Run i synthesizes measurements
/// with seed derive_seed(master_seed, i) and shares them across configs.
/// The result does not depend on `threads` (0 selects the hardware count).
std::vector<MonteCarloResult> run_monte_carlo(const SimDataset& truth, const MeasurementOptions& measurements,
                                              std::span<const RunConfig> configs, std::uint64_t master_seed,
                                              int n_runs, int threads);

/// Scenario description echoed into summaries.
struct ScenarioInfo {
  std::string source;  // preset name or dataset path
  double duration = 0.0;
  double gyro_rate = 0.0;
  double cam_rate = 0.0;
  int n_points = 0;
  double outlier_fraction = 0.0;
  std::vector<OcclusionWindow> occlusions;
};

/// Deterministic JSON summary: resolved config, scenario and results.
std::string summary_json(const MonteCarloResult& result, const ScenarioInfo& scenario);

/// Estimates as CSV: t,h00..h22,g00..g22,cov_trace.
void write_estimates_csv(const std::filesystem::path& path, const std::vector<BeliefState>& estimates);

}  // namespace hest
