#include <gtest/gtest.h>

#include "hest/errors.hpp"
#include "hest/metrics.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <random>

using hest::AlgebraVector;
using hest::Matrix8d;

namespace {

// Regularized lower incomplete gamma P(a, x): series below a + 1, Lentz
// continued fraction above.
double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double log_front = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 10000; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(log_front);
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return 1.0 - std::exp(log_front) * h;
}

double chi2_quantile(double k, double p) {
  double lo = 0.0;
  double hi = 10.0 * k + 100.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gamma_p(0.5 * k, 0.5 * mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

hest::TrialReport make_run(std::vector<double> r, std::vector<double> nees) {
  hest::TrialReport rep;
  for (std::size_t k = 0; k < r.size(); ++k) {
    hest::StepRecord s;
    s.t = 0.1 * static_cast<double>(k + 1);
    s.r_k = r[k];
    s.nees = nees[k];
    rep.steps.push_back(s);
  }
  hest::finalize_trial(rep);
  return rep;
}

}  // namespace

TEST(HomographyError, Cases) {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> n01;
  const hest::SL3 h = hest::exp_sl3(hest::wedge(AlgebraVector::Constant(0.1)));
  EXPECT_NEAR(hest::homography_error(h, h).r, 0.0, 1e-14);
  EXPECT_EQ(hest::homography_error(hest::SL3(), hest::SL3()).r, 0.0);
  for (int i = 0; i < 20; ++i) {
    AlgebraVector xi;
    for (int j = 0; j < 8; ++j) xi(j) = 0.05 * n01(rng);
    const hest::SL3 hat = hest::exp_sl3(hest::wedge(xi)) * h;
    const hest::HomographyError e = hest::homography_error(hat, h);
    EXPECT_FALSE(e.diverged);
    EXPECT_NEAR(e.r, xi.norm(), 1e-12);
  }
}

TEST(HomographyError, NearlySymmetric) {
  std::mt19937_64 rng(62);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 20; ++i) {
    AlgebraVector a;
    AlgebraVector b;
    for (int j = 0; j < 8; ++j) {
      a(j) = 0.2 * n01(rng);
      b(j) = n01(rng);
    }
    const hest::SL3 ha = hest::exp_sl3(hest::wedge(a));
    const hest::SL3 hb = hest::exp_sl3(hest::wedge(1e-3 * b.normalized())) * ha;
    EXPECT_NEAR(hest::homography_error(ha, hb).r, hest::homography_error(hb, ha).r, 1e-6);
    EXPECT_GT(hest::homography_error(ha, hb).r, 0.0);
  }
}

TEST(HomographyError, DivergenceSentinel) {
  const hest::SL3 far = hest::SL3::from_matrix_unchecked(Eigen::Vector3d(-1.0, -1.0, 1.0).asDiagonal());
  const hest::HomographyError e = hest::homography_error(far, hest::SL3());
  EXPECT_TRUE(e.diverged);
  EXPECT_EQ(e.r, hest::kDivergenceSentinel);
}

TEST(Nees, Cases) {
  EXPECT_EQ(hest::nees(AlgebraVector::Zero(), Matrix8d::Identity()), 0.0);
  EXPECT_DOUBLE_EQ(hest::nees(AlgebraVector::Unit(0), Matrix8d::Identity()), 1.0);
  EXPECT_DOUBLE_EQ(hest::nees(AlgebraVector::Unit(2), 4.0 * Matrix8d::Identity()), 0.25);
  EXPECT_THROW(hest::nees(AlgebraVector::Unit(0), Matrix8d::Zero()), hest::SingularCovarianceError);
}

TEST(Nees, ConsistentSamplesAverageDof) {
  std::mt19937_64 rng(63);
  std::normal_distribution<double> n01;
  Matrix8d a;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) a(i, j) = n01(rng);
  const Matrix8d p = a * a.transpose() + 0.5 * Matrix8d::Identity();
  const Eigen::LLT<Matrix8d> llt(p);
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    AlgebraVector z;
    for (int j = 0; j < 8; ++j) z(j) = n01(rng);
    sum += hest::nees(llt.matrixL() * z, p);
  }
  EXPECT_NEAR(sum / n, 8.0, 0.3);
}

TEST(Chi2Band, MatchesIncompleteGammaInversion) {
  for (int n : {1, 10, 100}) {
    const double k = 8.0 * n;
    const auto band = hest::chi2_band(8, n, 0.9973);
    EXPECT_NEAR(band.first, chi2_quantile(k, 0.00135) / n, 1e-7) << n;
    EXPECT_NEAR(band.second, chi2_quantile(k, 0.99865) / n, 1e-7) << n;
  }
}

TEST(Chi2Band, FrozenValues) {
  const auto b100 = hest::chi2_band(8, 100, 0.9973);
  EXPECT_NEAR(b100.first, 6.853156549, 1e-6);
  EXPECT_NEAR(b100.second, 9.253472454, 1e-6);
  const auto b1 = hest::chi2_band(8, 1, 0.9973);
  EXPECT_NEAR(b1.first, 0.93059, 1e-4);
  EXPECT_NEAR(b1.second, 25.3609, 1e-3);
}

TEST(Chi2Band, ContainsDofAndNarrows) {
  double prev_width = 1e300;
  for (int n : {1, 10, 100, 1000}) {
    const auto b = hest::chi2_band(8, n, 0.9973);
    EXPECT_LT(b.first, 8.0);
    EXPECT_GT(b.second, 8.0);
    EXPECT_LT(b.second - b.first, prev_width);
    prev_width = b.second - b.first;
  }
}

TEST(FinalizeTrial, MeanAndBand) {
  const hest::TrialReport r = make_run({0.1, 0.2, 0.3}, {1.0, 8.0, 100.0});
  EXPECT_NEAR(r.mean_r, 0.2, 1e-15);
  EXPECT_NEAR(r.nees_in_band_fraction, 2.0 / 3.0, 1e-15);
  EXPECT_FALSE(r.diverged);
}

TEST(Aggregate, SingleRunEqualsRun) {
  const hest::TrialReport r = make_run({0.1, 0.3}, {7.0, 9.0});
  const std::vector<hest::TrialReport> runs = {r};
  const hest::AggregateSummary s = hest::aggregate(runs);
  EXPECT_EQ(s.n_runs, 1u);
  EXPECT_DOUBLE_EQ(s.mean_r, r.mean_r);
  EXPECT_EQ(s.std_r, 0.0);
  EXPECT_EQ(s.mean_nees, (std::vector<double>{7.0, 9.0}));
  EXPECT_DOUBLE_EQ(s.nees_in_band_fraction, 1.0);
}

TEST(Aggregate, IdenticalRunsHaveZeroSpread) {
  const hest::TrialReport r = make_run({0.1, 0.3, 0.2}, {7.5, 8.5, 8.0});
  const std::vector<hest::TrialReport> runs(5, r);
  const hest::AggregateSummary s = hest::aggregate(runs);
  EXPECT_NEAR(s.mean_r, r.mean_r, 1e-15);
  EXPECT_NEAR(s.std_r, 0.0, 1e-15);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(s.mean_nees[k], r.steps[k].nees, 1e-14);
}

TEST(Aggregate, CrossRunMeans) {
  const std::vector<hest::TrialReport> runs = {make_run({0.1, 0.1}, {6.0, 10.0}),
                                               make_run({0.3, 0.3}, {10.0, 30.0})};
  const hest::AggregateSummary s = hest::aggregate(runs);
  EXPECT_NEAR(s.mean_r, 0.2, 1e-15);
  EXPECT_NEAR(s.std_r, std::sqrt(0.02), 1e-15);
  EXPECT_DOUBLE_EQ(s.mean_nees[0], 8.0);
  EXPECT_DOUBLE_EQ(s.mean_nees[1], 20.0);
  EXPECT_DOUBLE_EQ(s.nees_in_band_fraction, 0.5);
  const std::vector<hest::TrialReport> ragged = {make_run({0.1}, {8.0}), make_run({0.1, 0.2}, {8.0, 8.0})};
  EXPECT_THROW(hest::aggregate(ragged), hest::DomainError);
}

TEST(PercentDiff, TableConvention) {
  // Trajectory 1 row: IMM 0.0121, observer 0.0201, reported as 39.5%.
  const double d = hest::percent_diff(0.0201, 0.0121);
  EXPECT_NEAR(d, 0.398, 5e-4);
  EXPECT_NEAR(d, 0.395, 5e-3);
  EXPECT_THROW(hest::percent_diff(0.0, 0.1), hest::DomainError);
}
