#pragma once

// Trajectory and measurement simulator. The plane is fixed in the reference
// camera frame a as n_a^T rho = -d_a; the camera moves with the scaled
// velocity s_a(t) = r_dot / d_b(t) and body rate omega(t).

#include "hest/models.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace hest {

enum class MotionProfile { kConstantS, kRampS, kSinusoidS, kAggressiveS };

struct TrajectorySpec {
  double duration = 30.0;  // s
  double gyro_rate = 90.0;  // Hz
  double cam_rate = 30.0;   // Hz
  MotionProfile profile = MotionProfile::kConstantS;

  Eigen::Vector3d s0 = Eigen::Vector3d::Zero();       // 1/s, frame a
  Eigen::Vector3d s_dir = Eigen::Vector3d::UnitX();   // direction of the s_a variation
  /// Ramp slope (1/s^2) or oscillation amplitude (1/s).
  double amplitude = 0.0;
  double frequency = 0.0;  // Hz
  /// s_a varies only on [onset, end); after `end` it holds its last value.
  double onset = 0.0;
  double end = std::numeric_limits<double>::infinity();

  /// Body rate omega0 + omega_amp .* sin(2 pi omega_freq t + phase), with a
  /// per-axis phase offset so the axes are not synchronous.
  Eigen::Vector3d omega0 = Eigen::Vector3d::Zero();
  Eigen::Vector3d omega_amp = Eigen::Vector3d::Zero();
  double omega_freq = 0.0;

  Eigen::Vector3d n0 = -Eigen::Vector3d::UnitZ();  // plane normal at t = 0
  double d0 = 1.5;                                  // m, plane distance at t = 0
  std::uint64_t seed = 0;

  /// Throws ConfigError on non-positive rates, a gyro rate that is not an
  /// integer multiple of the camera rate, or a non-unit normal.
  void validate() const;
  /// Number of gyro ticks per camera frame.
  int gyro_per_frame() const;
};

struct OcclusionWindow {
  double start = 0.0;
  double end = 0.0;
  int min_visible = 0;
};

struct TruthSample {
  double t = 0.0;
  SL3 H;
  AlgebraMatrix Gamma = AlgebraMatrix::Zero();
  double s_dot_norm = 0.0;
};

struct SimDataset {
  double gyro_rate = 90.0;
  double cam_rate = 30.0;
  std::vector<GyroSample> gyro;
  std::vector<FeatureFrame> frames;
  /// Empty for recorded data.
  std::vector<TruthSample> truth;
};

struct MeasurementOptions {
  NoiseConfig noise;
  CameraIntrinsics K;
  std::vector<OcclusionWindow> occlusions;
  int n_points = 4;
  /// Probability that an observation is replaced by a gross outlier.
  double outlier_fraction = 0.0;
  double outlier_px = 100.0;
  int image_width = 640;
  int image_height = 480;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Truth stream at the gyro rate, noise-free gyro samples and empty camera
/// frames at the camera rate (first frame at t = 1/cam_rate).
SimDataset generate_trajectory(const TrajectorySpec& spec);

/// Noisy gyro samples and feature frames for a truth dataset.
SimDataset synthesize_measurements(const SimDataset& truth, const MeasurementOptions& options);

/// Normalized reference-view points: the corners of the rectangle
/// |x| <= 0.25, |y| <= 0.2, then uniform samples inside it.
std::vector<Eigen::Vector3d> reference_points(int n_points, std::uint64_t seed);

/// Preset names traj1..traj8, ordered from compliant to most violating.
const std::vector<std::string>& preset_names();
TrajectorySpec trajectory_preset(std::string_view name);
bool preset_is_compliant(std::string_view name);

/// Truth sample at time t (matched within 1e-9 s), or nullptr.
const TruthSample* truth_at(const SimDataset& ds, double t);

double max_s_dot_norm(const SimDataset& ds);

}  // namespace hest
