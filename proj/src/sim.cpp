#include "hest/sim.hpp"

#include "hest/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace hest {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kPositionSubsteps = 16;

struct ScaledVelocity {
  Eigen::Vector3d s;
  Eigen::Vector3d s_dot;
};

Eigen::Vector3d perpendicular_in_plane(const TrajectorySpec& spec) {
  Eigen::Vector3d p = spec.s_dir.cross(spec.n0);
  if (p.norm() < 1e-9) {
    p = spec.s_dir.cross(Eigen::Vector3d::UnitY());
  }
  return p.normalized();
}

ScaledVelocity scaled_velocity(const TrajectorySpec& spec, double t) {
  const Eigen::Vector3d dir = spec.s_dir.normalized();
  const bool inside = t >= spec.onset && t < spec.end;
  const double tau = std::clamp(t, spec.onset, spec.end) - spec.onset;
  ScaledVelocity v{spec.s0, Eigen::Vector3d::Zero()};
  const double w = kTwoPi * spec.frequency;
  switch (spec.profile) {
    case MotionProfile::kConstantS:
      break;
    case MotionProfile::kRampS:
      v.s += spec.amplitude * tau * dir;
      if (inside) {
        v.s_dot = spec.amplitude * dir;
      }
      break;
    case MotionProfile::kSinusoidS:
      v.s += spec.amplitude * std::sin(w * tau) * dir;
      if (inside) {
        v.s_dot = spec.amplitude * w * std::cos(w * tau) * dir;
      }
      break;
    case MotionProfile::kAggressiveS: {
      const Eigen::Vector3d perp = perpendicular_in_plane(spec);
      v.s += spec.amplitude * (std::sin(w * tau) * dir + 0.5 * std::sin(1.7 * w * tau) * perp);
      if (inside) {
        v.s_dot = spec.amplitude * w * (std::cos(w * tau) * dir + 0.85 * std::cos(1.7 * w * tau) * perp);
      }
      break;
    }
  }
  return v;
}

Eigen::Vector3d body_rate(const TrajectorySpec& spec, double t) {
  Eigen::Vector3d w = spec.omega0;
  for (int i = 0; i < 3; ++i) {
    w(i) += spec.omega_amp(i) * std::sin(kTwoPi * spec.omega_freq * t + 0.7 * i);
  }
  return w;
}

Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& phi) {
  const double angle = phi.norm();
  if (angle == 0.0) {
    return Eigen::Matrix3d::Identity();
  }
  return Eigen::AngleAxisd(angle, phi / angle).toRotationMatrix();
}

bool in_window(const std::vector<OcclusionWindow>& windows, double t, int& min_visible) {
  bool hit = false;
  for (const OcclusionWindow& w : windows) {
    if (t >= w.start && t < w.end) {
      min_visible = hit ? std::min(min_visible, w.min_visible) : w.min_visible;
      hit = true;
    }
  }
  return hit;
}

}  // namespace

void TrajectorySpec::validate() const {
  if (!(duration > 0.0) || !(gyro_rate > 0.0) || !(cam_rate > 0.0)) {
    throw ConfigError("trajectory: duration and rates must be positive");
  }
  const double ratio = gyro_rate / cam_rate;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
    throw ConfigError("trajectory: gyro rate must be an integer multiple of the camera rate");
  }
  if (std::abs(n0.norm() - 1.0) > 1e-9) {
    throw ConfigError("trajectory: plane normal must be a unit vector");
  }
  if (!(d0 > 0.0)) {
    throw ConfigError("trajectory: plane distance must be positive");
  }
  if (!(end > onset)) {
    throw ConfigError("trajectory: variation window must have end > onset");
  }
  if (profile != MotionProfile::kConstantS && s_dir.norm() == 0.0) {
    throw ConfigError("trajectory: s_dir must be non-zero");
  }
}

int TrajectorySpec::gyro_per_frame() const { return static_cast<int>(std::lround(gyro_rate / cam_rate)); }

void MeasurementOptions::validate() const {
  // Zero noise is allowed here; only the filter needs positive variances.
  if (!(noise.sigma_g >= 0.0) || !(noise.sigma_r >= 0.0) || !std::isfinite(noise.sigma_g) ||
      !std::isfinite(noise.sigma_r)) {
    throw ConfigError("measurements: sigma_g and sigma_r must be finite and non-negative");
  }
  K.validate();
  if (n_points < 4) {
    throw ConfigError("measurements: at least 4 points are required");
  }
  if (outlier_fraction < 0.0 || outlier_fraction > 1.0) {
    throw ConfigError("measurements: outlier fraction must lie in [0, 1]");
  }
  for (const OcclusionWindow& w : occlusions) {
    if (!(w.end > w.start) || w.min_visible < 0) {
      throw ConfigError("measurements: occlusion windows need start < end and min_visible >= 0");
    }
  }
}

SimDataset generate_trajectory(const TrajectorySpec& spec) {
  spec.validate();
  const int per_frame = spec.gyro_per_frame();
  const auto ticks = static_cast<long>(std::llround(spec.duration * spec.gyro_rate));
  const double dt = 1.0 / spec.gyro_rate;

  SimDataset ds;
  ds.gyro_rate = spec.gyro_rate;
  ds.cam_rate = spec.cam_rate;
  ds.gyro.reserve(static_cast<std::size_t>(ticks));
  ds.truth.reserve(static_cast<std::size_t>(ticks) + 1);

  Eigen::Matrix3d C = Eigen::Matrix3d::Identity();
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  auto distance = [&](const Eigen::Vector3d& pos) { return spec.d0 + spec.n0.dot(pos); };
  auto r_dot = [&](const Eigen::Vector3d& pos, double t) { return distance(pos) * scaled_velocity(spec, t).s; };

  for (long k = 0; k <= ticks; ++k) {
    const double t = static_cast<double>(k) / spec.gyro_rate;
    const double d = distance(r);
    if (!(d > 0.0)) {
      std::ostringstream msg;
      msg << "trajectory: camera reached the plane at t = " << t;
      throw DomainError(msg.str());
    }
    const ScaledVelocity sv = scaled_velocity(spec, t);
    PlanePose pose;
    pose.C_ab = C;
    pose.r_a_ba = r;
    pose.n_b = C.transpose() * spec.n0;
    pose.d_b = d;
    TruthSample sample;
    sample.t = t;
    sample.H = homography_from_pose(pose);
    sample.Gamma = gamma_from_velocity(C.transpose() * (d * sv.s), pose.n_b, d);
    sample.s_dot_norm = sv.s_dot.norm();
    ds.truth.push_back(sample);
    if (k > 0 && k % per_frame == 0) {
      ds.frames.push_back(FeatureFrame{t, {}});
    }
    if (k == ticks) {
      break;
    }

    const Eigen::Vector3d omega = body_rate(spec, t);
    ds.gyro.push_back(GyroSample{t, omega});

    const double h = dt / kPositionSubsteps;
    for (int i = 0; i < kPositionSubsteps; ++i) {
      const double ti = t + i * h;
      const Eigen::Vector3d k1 = r_dot(r, ti);
      const Eigen::Vector3d k2 = r_dot(r + 0.5 * h * k1, ti + 0.5 * h);
      const Eigen::Vector3d k3 = r_dot(r + 0.5 * h * k2, ti + 0.5 * h);
      const Eigen::Vector3d k4 = r_dot(r + h * k3, ti + h);
      r += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    C = C * rotation_exp(omega * dt);
  }
  return ds;
}

std::vector<Eigen::Vector3d> reference_points(int n_points, std::uint64_t seed) {
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(static_cast<std::size_t>(std::max(n_points, 0)));
  constexpr double kHalfWidth = 0.25;
  constexpr double kHalfHeight = 0.2;
  const double corners[4][2] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  for (int i = 0; i < std::min(n_points, 4); ++i) {
    pts.emplace_back(corners[i][0] * kHalfWidth, corners[i][1] * kHalfHeight, 1.0);
  }
  std::mt19937_64 rng(seed ^ 0x5eedf00dULL);
  std::uniform_real_distribution<double> ux(-kHalfWidth, kHalfWidth);
  std::uniform_real_distribution<double> uy(-kHalfHeight, kHalfHeight);
  for (int i = 4; i < n_points; ++i) {
    const double x = ux(rng);
    const double y = uy(rng);
    pts.emplace_back(x, y, 1.0);
  }
  return pts;
}

SimDataset synthesize_measurements(const SimDataset& truth, const MeasurementOptions& options) {
  options.validate();
  SimDataset out;
  out.gyro_rate = truth.gyro_rate;
  out.cam_rate = truth.cam_rate;
  out.truth = truth.truth;

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  out.gyro.reserve(truth.gyro.size());
  for (std::size_t k = 0; k < truth.gyro.size(); ++k) {
    const double dt = k + 1 < truth.gyro.size() ? truth.gyro[k + 1].t - truth.gyro[k].t : 1.0 / truth.gyro_rate;
    const double sd = options.noise.sigma_g / std::sqrt(dt);
    GyroSample g = truth.gyro[k];
    for (int i = 0; i < 3; ++i) {
      g.omega(i) += sd * normal(rng);
    }
    out.gyro.push_back(g);
  }

  const std::vector<Eigen::Vector3d> points = reference_points(options.n_points, options.seed);
  out.frames.reserve(truth.frames.size());
  for (const FeatureFrame& empty : truth.frames) {
    FeatureFrame frame{empty.t, {}};
    const TruthSample* ts = truth_at(truth, empty.t);
    if (ts == nullptr) {
      throw DomainError("measurements: no truth sample at a frame time");
    }
    int min_visible = 0;
    const bool occluded = in_window(options.occlusions, frame.t, min_visible);
    const FilterState state{ts->H, ts->Gamma, ts->t};
    for (int id = 0; id < options.n_points; ++id) {
      // Draw every random number regardless of visibility so that the noise
      // sequence does not depend on which points are seen.
      const double nu = normal(rng);
      const double nv = normal(rng);
      const double outlier_draw = uniform(rng);
      const double outlier_angle = kTwoPi * uniform(rng);
      const Eigen::Vector3d& p = points[static_cast<std::size_t>(id)];
      if (occluded && static_cast<int>(frame.correspondences.size()) >= min_visible) {
        continue;
      }
      Eigen::Vector2d pix;
      try {
        pix = predict_pixel(state, p, options.K);
      } catch (const BehindCameraError&) {
        continue;
      }
      if (pix.x() < 0.0 || pix.y() < 0.0 || pix.x() >= options.image_width || pix.y() >= options.image_height) {
        continue;
      }
      pix += options.noise.sigma_r * Eigen::Vector2d(nu, nv);
      if (outlier_draw < options.outlier_fraction) {
        pix += options.outlier_px * Eigen::Vector2d(std::cos(outlier_angle), std::sin(outlier_angle));
      }
      frame.correspondences.push_back(FeatureCorrespondence{id, p, pix});
    }
    out.frames.push_back(std::move(frame));
  }
  return out;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"traj1", "traj2", "traj3", "traj4",
                                                 "traj5", "traj6", "traj7", "traj8"};
  return names;
}

TrajectorySpec trajectory_preset(std::string_view name) {
  TrajectorySpec s;
  s.omega_amp = Eigen::Vector3d(0.04, 0.04, 0.08);
  s.omega_freq = 0.25;
  if (name == "traj1") {
    // Constant velocity parallel to the plane.
    s.s0 = Eigen::Vector3d(0.003, 0.0015, 0.0);
  } else if (name == "traj2") {
    // Exponential approach towards the plane.
    s.s0 = Eigen::Vector3d(0.002, -0.001, 0.01);
    s.omega_amp = Eigen::Vector3d(0.03, 0.03, 0.06);
    s.omega_freq = 0.3;
  } else if (name == "traj3") {
    // Velocity ramps through zero at mid-run.
    s.profile = MotionProfile::kRampS;
    s.s_dir = Eigen::Vector3d::UnitX();
    s.amplitude = 0.002;
    s.s0 = -15.0 * s.amplitude * s.s_dir;
  } else if (name == "traj4") {
    s.profile = MotionProfile::kSinusoidS;
    s.s0 = Eigen::Vector3d(0.002, 0.0, 0.0);
    s.amplitude = 0.02;
    s.frequency = 0.2;
  } else if (name == "traj5") {
    s.profile = MotionProfile::kSinusoidS;
    s.s_dir = Eigen::Vector3d(1.0, 1.0, 0.0).normalized();
    s.amplitude = 0.05;
    s.frequency = 0.5;
  } else if (name == "traj6") {
    s.profile = MotionProfile::kSinusoidS;
    s.s_dir = Eigen::Vector3d(1.0, 0.0, 1.0).normalized();
    s.amplitude = 0.2;
    s.frequency = 1.0;
  } else if (name == "traj7") {
    s.profile = MotionProfile::kAggressiveS;
    s.amplitude = 0.2;
    s.frequency = 1.5;
  } else if (name == "traj8") {
    s.profile = MotionProfile::kAggressiveS;
    s.s_dir = Eigen::Vector3d(1.0, 0.0, 0.5).normalized();
    s.amplitude = 2.5;
    s.frequency = 10.0;
  } else if (name == "switch") {
    // traj1 with a sinusoidal burst over [10, 15) s; whole periods, so the
    // velocity returns to s0 afterwards.
    s.s0 = Eigen::Vector3d(0.003, 0.0015, 0.0);
    s.profile = MotionProfile::kSinusoidS;
    s.s_dir = Eigen::Vector3d(1.0, 0.0, 1.0).normalized();
    s.amplitude = 1.0;
    s.frequency = 3.0;
    s.onset = 10.0;
    s.end = 15.0;
  } else {
    throw ConfigError("unknown trajectory preset '" + std::string(name) + "'");
  }
  return s;
}

bool preset_is_compliant(std::string_view name) {
  return trajectory_preset(name).profile == MotionProfile::kConstantS;
}

const TruthSample* truth_at(const SimDataset& ds, double t) {
  auto it = std::lower_bound(ds.truth.begin(), ds.truth.end(), t - 1e-9,
                             [](const TruthSample& s, double value) { return s.t < value; });
  if (it == ds.truth.end() || std::abs(it->t - t) > 1e-9) {
    return nullptr;
  }
  return &*it;
}

double max_s_dot_norm(const SimDataset& ds) {
  double m = 0.0;
  for (const TruthSample& s : ds.truth) {
    m = std::max(m, s.s_dot_norm);
  }
  return m;
}

}  // namespace hest
