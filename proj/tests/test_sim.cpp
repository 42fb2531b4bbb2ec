#include <gtest/gtest.h>

#include "hest/errors.hpp"
#include "hest/sim.hpp"

#include <Eigen/LU>

#include <cmath>

using hest::MeasurementOptions;
using hest::SimDataset;
using hest::TrajectorySpec;

namespace {

TrajectorySpec short_spec(const char* preset, double duration) {
  TrajectorySpec s = hest::trajectory_preset(preset);
  s.duration = duration;
  return s;
}

MeasurementOptions zero_noise() {
  MeasurementOptions m;
  m.noise.sigma_g = 0.0;
  m.noise.sigma_r = 0.0;
  return m;
}

}  // namespace

TEST(TrajectorySpec, Validation) {
  TrajectorySpec s;
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.gyro_per_frame(), 3);
  s.gyro_rate = 100.0;
  EXPECT_THROW(s.validate(), hest::ConfigError);
  s = {};
  s.cam_rate = 0.0;
  EXPECT_THROW(s.validate(), hest::ConfigError);
  s = {};
  s.n0 = Eigen::Vector3d(0.0, 0.0, -2.0);
  EXPECT_THROW(s.validate(), hest::ConfigError);
}

TEST(GenerateTrajectory, StaticCamera) {
  TrajectorySpec s;
  s.duration = 2.0;
  const SimDataset ds = hest::generate_trajectory(s);
  ASSERT_FALSE(ds.truth.empty());
  for (const auto& t : ds.truth) {
    EXPECT_EQ(t.H.matrix(), ds.truth.front().H.matrix());
    EXPECT_EQ(t.s_dot_norm, 0.0);
  }
  EXPECT_EQ(ds.gyro.size(), 180u);
  EXPECT_EQ(ds.frames.size(), 60u);
  EXPECT_NEAR(ds.frames.front().t, 1.0 / 30.0, 1e-12);
}

TEST(GenerateTrajectory, ConstantProfileHasConstantS) {
  for (const char* name : {"traj1", "traj2"}) {
    EXPECT_TRUE(hest::preset_is_compliant(name));
    EXPECT_LT(hest::max_s_dot_norm(hest::generate_trajectory(hest::trajectory_preset(name))), 1e-10) << name;
  }
}

TEST(GenerateTrajectory, AggressivePresetExceedsThreshold) {
  EXPECT_FALSE(hest::preset_is_compliant("traj8"));
  EXPECT_GT(hest::max_s_dot_norm(hest::generate_trajectory(hest::trajectory_preset("traj8"))), 155.0);
}

TEST(GenerateTrajectory, PresetsOrderedByViolation) {
  const auto& names = hest::preset_names();
  ASSERT_EQ(names.size(), 8u);
  double prev = -1.0;
  for (std::size_t i = 2; i < names.size(); ++i) {
    EXPECT_FALSE(hest::preset_is_compliant(names[i]));
    const double m = hest::max_s_dot_norm(hest::generate_trajectory(hest::trajectory_preset(names[i])));
    EXPECT_GT(m, 0.0) << names[i];
    if (i >= 3) {
      EXPECT_GT(m, prev) << names[i];
    }
    prev = m;
  }
  EXPECT_THROW(hest::trajectory_preset("traj9"), hest::ConfigError);
}

TEST(GenerateTrajectory, TruthOnManifold) {
  const SimDataset ds = hest::generate_trajectory(short_spec("traj6", 5.0));
  for (const auto& t : ds.truth) {
    EXPECT_NEAR(t.H.matrix().determinant(), 1.0, 1e-9);
    EXPECT_NEAR(t.Gamma.trace(), 0.0, 1e-10);
  }
}

TEST(GenerateTrajectory, CompliantTruthFollowsProcessModel) {
  for (const char* name : {"traj1", "traj2"}) {
    const SimDataset ds = hest::generate_trajectory(hest::trajectory_preset(name));
    hest::FilterState x{ds.truth.front().H, ds.truth.front().Gamma, ds.truth.front().t};
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < ds.truth.size(); ++k) {
      x = hest::propagate_state(x, ds.gyro[k].omega, ds.truth[k + 1].t - ds.truth[k].t);
      worst = std::max(worst, (x.H.matrix() - ds.truth[k + 1].H.matrix()).cwiseAbs().maxCoeff());
    }
    EXPECT_LT(worst, 1e-6) << name;
    EXPECT_GT(ds.truth.back().t, 29.9);
  }
}

TEST(SynthesizeMeasurements, ZeroNoiseIsExact) {
  const SimDataset truth = hest::generate_trajectory(short_spec("traj5", 5.0));
  const MeasurementOptions opts = zero_noise();
  const SimDataset ds = hest::synthesize_measurements(truth, opts);
  ASSERT_EQ(ds.gyro.size(), truth.gyro.size());
  for (std::size_t k = 0; k < ds.gyro.size(); ++k) {
    EXPECT_EQ(ds.gyro[k].omega, truth.gyro[k].omega);
  }
  std::size_t seen = 0;
  for (const auto& f : ds.frames) {
    const hest::TruthSample* t = hest::truth_at(truth, f.t);
    ASSERT_NE(t, nullptr);
    const hest::FilterState s{t->H, t->Gamma, t->t};
    for (const auto& c : f.correspondences) {
      EXPECT_EQ(c.y_pix, hest::predict_pixel(s, c.p_ref, opts.K));
      EXPECT_EQ(c.p_ref.z(), 1.0);
      ++seen;
    }
  }
  EXPECT_EQ(seen, 4 * ds.frames.size());
}

TEST(SynthesizeMeasurements, PixelNoiseVariance) {
  const SimDataset truth = hest::generate_trajectory(short_spec("traj1", 30.0));
  MeasurementOptions opts;
  opts.n_points = 6;
  opts.seed = 7;
  const SimDataset ds = hest::synthesize_measurements(truth, opts);
  double sum = 0.0;
  double sum2 = 0.0;
  std::size_t n = 0;
  for (const auto& f : ds.frames) {
    const hest::TruthSample* t = hest::truth_at(truth, f.t);
    const hest::FilterState s{t->H, t->Gamma, t->t};
    for (const auto& c : f.correspondences) {
      const Eigen::Vector2d e = c.y_pix - hest::predict_pixel(s, c.p_ref, opts.K);
      for (int i = 0; i < 2; ++i) {
        sum += e(i);
        sum2 += e(i) * e(i);
        ++n;
      }
    }
  }
  ASSERT_GE(n, 10000u);
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(SynthesizeMeasurements, GyroNoiseVariance) {
  const SimDataset truth = hest::generate_trajectory(short_spec("traj1", 30.0));
  MeasurementOptions opts;
  opts.noise.sigma_g = 0.01;
  const SimDataset ds = hest::synthesize_measurements(truth, opts);
  double sum2 = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < ds.gyro.size(); ++k) {
    const Eigen::Vector3d e = ds.gyro[k].omega - truth.gyro[k].omega;
    sum2 += e.squaredNorm();
    n += 3;
  }
  // Per-sample standard deviation sigma_g / sqrt(dt).
  const double want = 0.01 * 0.01 * 90.0;
  EXPECT_NEAR(sum2 / n, want, 0.05 * want);
}

TEST(SynthesizeMeasurements, Occlusion) {
  const SimDataset truth = hest::generate_trajectory(short_spec("traj1", 6.0));
  MeasurementOptions opts;
  opts.occlusions = {{2.0, 3.0, 0}, {4.0, 5.0, 2}};
  const SimDataset ds = hest::synthesize_measurements(truth, opts);
  int empty = 0;
  for (const auto& f : ds.frames) {
    if (f.t >= 2.0 && f.t < 3.0) {
      EXPECT_TRUE(f.correspondences.empty()) << f.t;
      ++empty;
    } else if (f.t >= 4.0 && f.t < 5.0) {
      EXPECT_EQ(f.correspondences.size(), 2u) << f.t;
    } else {
      EXPECT_EQ(f.correspondences.size(), 4u) << f.t;
    }
  }
  EXPECT_GE(empty, 29);
}

TEST(SynthesizeMeasurements, OutliersAreDisplaced) {
  const SimDataset truth = hest::generate_trajectory(short_spec("traj1", 10.0));
  MeasurementOptions opts = zero_noise();
  opts.outlier_fraction = 0.2;
  opts.outlier_px = 100.0;
  const SimDataset ds = hest::synthesize_measurements(truth, opts);
  std::size_t outliers = 0;
  std::size_t total = 0;
  for (const auto& f : ds.frames) {
    const hest::TruthSample* t = hest::truth_at(truth, f.t);
    const hest::FilterState s{t->H, t->Gamma, t->t};
    for (const auto& c : f.correspondences) {
      const double d = (c.y_pix - hest::predict_pixel(s, c.p_ref, opts.K)).norm();
      if (d > 1.0) {
        EXPECT_NEAR(d, 100.0, 1e-9);
        ++outliers;
      }
      ++total;
    }
  }
  EXPECT_NEAR(static_cast<double>(outliers) / total, 0.2, 0.03);
}

TEST(SynthesizeMeasurements, SeedDeterminism) {
  const SimDataset truth = hest::generate_trajectory(short_spec("traj4", 3.0));
  MeasurementOptions opts;
  opts.seed = 123;
  const SimDataset a = hest::synthesize_measurements(truth, opts);
  const SimDataset b = hest::synthesize_measurements(truth, opts);
  opts.seed = 124;
  const SimDataset c = hest::synthesize_measurements(truth, opts);
  ASSERT_EQ(a.frames.size(), b.frames.size());
  bool differs = false;
  for (std::size_t k = 0; k < a.frames.size(); ++k) {
    ASSERT_EQ(a.frames[k].correspondences.size(), b.frames[k].correspondences.size());
    for (std::size_t i = 0; i < a.frames[k].correspondences.size(); ++i) {
      EXPECT_EQ(a.frames[k].correspondences[i].y_pix, b.frames[k].correspondences[i].y_pix);
      differs = differs || a.frames[k].correspondences[i].y_pix != c.frames[k].correspondences[i].y_pix;
    }
  }
  for (std::size_t k = 0; k < a.gyro.size(); ++k) {
    EXPECT_EQ(a.gyro[k].omega, b.gyro[k].omega);
  }
  EXPECT_TRUE(differs);
}

TEST(SynthesizeMeasurements, RejectsTooFewPoints) {
  const SimDataset truth = hest::generate_trajectory(short_spec("traj1", 1.0));
  MeasurementOptions opts;
  opts.n_points = 3;
  EXPECT_THROW(hest::synthesize_measurements(truth, opts), hest::ConfigError);
  opts = {};
  opts.noise.sigma_r = -1.0;
  EXPECT_THROW(hest::synthesize_measurements(truth, opts), hest::ConfigError);
}

TEST(ReferencePoints, CornersFirst) {
  const auto pts = hest::reference_points(6, 1);
  ASSERT_EQ(pts.size(), 6u);
  EXPECT_EQ(pts[0], Eigen::Vector3d(-0.25, -0.2, 1.0));
  EXPECT_EQ(pts[2], Eigen::Vector3d(0.25, 0.2, 1.0));
  for (const auto& p : pts) {
    EXPECT_LE(std::abs(p.x()), 0.25);
    EXPECT_LE(std::abs(p.y()), 0.2);
  }
}
