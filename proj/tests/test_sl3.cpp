#include <gtest/gtest.h>

#include "hest/errors.hpp"
#include "hest/sl3.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <random>

using hest::AlgebraVector;
using hest::Matrix8d;
using hest::SL3;

namespace {

AlgebraVector random_xi(std::mt19937_64& rng, double norm) {
  std::normal_distribution<double> n01(0.0, 1.0);
  AlgebraVector v;
  for (int i = 0; i < 8; ++i) v(i) = n01(rng);
  return v.normalized() * norm;
}

AlgebraVector basis(int k) {
  AlgebraVector e = AlgebraVector::Zero();
  e(k) = 1.0;
  return e;
}

// Plain Taylor series without scaling; fine for small arguments.
Eigen::Matrix3d series_exp(const Eigen::Matrix3d& m) {
  Eigen::Matrix3d sum = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d term = Eigen::Matrix3d::Identity();
  for (int k = 1; k < 60; ++k) {
    term = (term * m / k).eval();
    sum += term;
  }
  return sum;
}

SL3 random_group(std::mt19937_64& rng, double norm) {
  return hest::exp_sl3(hest::wedge(random_xi(rng, norm)));
}

}  // namespace

TEST(Wedge, ZeroAndBasisFour) {
  EXPECT_TRUE(hest::wedge(AlgebraVector::Zero()).isZero(0.0));
  const Eigen::Matrix3d m = hest::wedge(basis(3));
  Eigen::Matrix3d expected = Eigen::Vector3d(1.0, 1.0, -2.0).asDiagonal();
  EXPECT_EQ(m, expected);
}

TEST(Wedge, EntriesFollowBasis) {
  AlgebraVector x;
  x << 1, 2, 3, 4, 5, 6, 7, 8;
  Eigen::Matrix3d expected;
  expected << 4 + 5, -3 + 6, 1,
              3 + 6, 4 - 5, 2,
              7, 8, -8;
  EXPECT_EQ(hest::wedge(x), expected);
}

TEST(Wedge, TraceFree) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    EXPECT_NEAR(hest::wedge(random_xi(rng, 3.0)).trace(), 0.0, 1e-14);
  }
}

TEST(Vee, InvertsWedge) {
  std::mt19937_64 rng(2);
  EXPECT_TRUE(hest::vee(Eigen::Matrix3d::Zero()).isZero(0.0));
  EXPECT_EQ(hest::vee(Eigen::Vector3d(1.0, 1.0, -2.0).asDiagonal()), basis(3));
  for (int i = 0; i < 100; ++i) {
    const AlgebraVector x = random_xi(rng, 2.0);
    EXPECT_LT((hest::vee(hest::wedge(x)) - x).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Vee, RejectsTrace) {
  EXPECT_THROW(hest::vee(Eigen::Matrix3d::Identity()), hest::InvalidAlgebraElement);
}

TEST(Exp, IdentityAndDeterminant) {
  EXPECT_EQ(hest::exp_sl3(Eigen::Matrix3d::Zero()).matrix(), Eigen::Matrix3d::Identity());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> len(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Matrix3d m = hest::wedge(random_xi(rng, len(rng)));
    const SL3 h = hest::exp_sl3(m);
    EXPECT_NEAR(h.matrix().determinant(), 1.0, 1e-10);
    EXPECT_LT(((h * hest::exp_sl3(-m)).matrix() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((h.matrix() - series_exp(m)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Log, Identity) {
  EXPECT_TRUE(hest::log_sl3(SL3()).isZero(0.0));
}

TEST(Log, RoundTripAgainstSeries) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> len(0.0, 0.5);
  int accepted = 0;
  for (int i = 0; i < 200; ++i) {
    const AlgebraVector x = random_xi(rng, len(rng));
    const Eigen::Matrix3d h = series_exp(hest::wedge(x));
    // Parts of this ball lie outside the default radius guard, so the
    // unguarded principal log is checked everywhere and the guarded one
    // wherever it accepts the input.
    const Eigen::Matrix3d m = hest::log_sl3(SL3::from_matrix_unchecked(h), hest::LogOptions{0.0});
    EXPECT_LT((hest::vee(m) - x).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(m.trace(), 0.0, 1e-10);
    EXPECT_LT((hest::exp_sl3(m).matrix() - h).cwiseAbs().maxCoeff(), 1e-9);
    try {
      const Eigen::Matrix3d guarded = hest::log_sl3(SL3::from_matrix_unchecked(h));
      EXPECT_LT((hest::vee(guarded) - x).cwiseAbs().maxCoeff(), 1e-9);
      ++accepted;
    } catch (const hest::LogDomainError&) {
    }
  }
  EXPECT_GT(accepted, 150);
}

TEST(Log, LargeDiagonalThrowsOrMatchesEigenLog) {
  const SL3 h = SL3::from_matrix_unchecked(Eigen::Vector3d(2.0, 1.0, 0.5).asDiagonal());

  Eigen::EigenSolver<Eigen::Matrix3d> es(h.matrix());
  const Eigen::Matrix3cd v = es.eigenvectors();
  const Eigen::Vector3cd lam = es.eigenvalues();
  Eigen::Vector3cd log_lam;
  for (int i = 0; i < 3; ++i) log_lam(i) = std::log(lam(i));
  const Eigen::Matrix3d oracle = (v * log_lam.asDiagonal() * v.inverse()).real();

  auto check = [&](const hest::LogOptions& opts) {
    try {
      const Eigen::Matrix3d m = hest::log_sl3(h, opts);
      EXPECT_LT((m - oracle).cwiseAbs().maxCoeff(), 1e-9);
      return true;
    } catch (const hest::LogDomainError&) {
      return false;
    }
  };
  // Default radius bound: |h - I| has spectral radius 1, so this must throw.
  EXPECT_FALSE(check(hest::LogOptions{}));
  // Without the radius bound the principal log exists and must be correct.
  EXPECT_TRUE(check(hest::LogOptions{0.0}));
}

TEST(Log, NegativeEigenvalueThrows) {
  const SL3 h = SL3::from_matrix_unchecked(Eigen::Vector3d(-1.0, -1.0, 1.0).asDiagonal());
  EXPECT_THROW(hest::log_sl3(h, hest::LogOptions{0.0}), hest::LogDomainError);
}

TEST(Project, ScalesToUnitDeterminant) {
  EXPECT_LT((hest::project_sl3(2.0 * Eigen::Matrix3d::Identity()).matrix() - Eigen::Matrix3d::Identity())
                .cwiseAbs()
                .maxCoeff(),
            1e-15);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const SL3 h = random_group(rng, 0.8);
    EXPECT_LT((hest::project_sl3(h.matrix()).matrix() - h.matrix()).cwiseAbs().maxCoeff(), 1e-14);
    Eigen::Matrix3d x = Eigen::Matrix3d::Random() + 3.0 * Eigen::Matrix3d::Identity();
    if (x.determinant() <= 0) continue;
    EXPECT_NEAR(hest::project_sl3(x).matrix().determinant(), 1.0, 1e-12);
  }
}

TEST(Project, RejectsNonPositiveDeterminant) {
  EXPECT_THROW(hest::project_sl3(Eigen::Matrix3d::Zero()), hest::ProjectionError);
  EXPECT_THROW(hest::project_sl3(-Eigen::Matrix3d::Identity()), hest::ProjectionError);
}

TEST(Adjoint, IdentityAndColumns) {
  EXPECT_EQ(hest::adjoint_matrix(SL3()), Matrix8d::Identity());
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const SL3 h = random_group(rng, 0.7);
    const Matrix8d ad = hest::adjoint_matrix(h);
    const Eigen::Matrix3d hinv = h.matrix().inverse();
    for (int k = 0; k < 8; ++k) {
      const AlgebraVector col = hest::vee(h.matrix() * hest::wedge(basis(k)) * hinv);
      EXPECT_LT((ad.col(k) - col).cwiseAbs().maxCoeff(), 1e-12);
    }
    const AlgebraVector x = random_xi(rng, 1.0);
    EXPECT_LT((ad * x - hest::vee(h.matrix() * hest::wedge(x) * hinv)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Adjoint, Homomorphism) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const SL3 a = random_group(rng, 0.6);
    const SL3 b = random_group(rng, 0.6);
    const Matrix8d lhs = hest::adjoint_matrix(a * b);
    const Matrix8d rhs = hest::adjoint_matrix(a) * hest::adjoint_matrix(b);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(LittleAdjoint, BracketColumns) {
  EXPECT_TRUE(hest::little_adjoint(AlgebraVector::Zero()).isZero(0.0));
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const AlgebraVector x = random_xi(rng, 1.5);
    const Matrix8d ad = hest::little_adjoint(x);
    EXPECT_LT((ad * x).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::Matrix3d wx = hest::wedge(x);
    for (int k = 0; k < 8; ++k) {
      const Eigen::Matrix3d ek = hest::wedge(basis(k));
      EXPECT_LT((ad.col(k) - hest::vee(wx * ek - ek * wx)).cwiseAbs().maxCoeff(), 1e-13);
    }
  }
}

TEST(Odot, MatchesWedgeProduct) {
  EXPECT_TRUE(hest::odot(Eigen::Vector3d::Zero()).isZero(0.0));
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d p = Eigen::Vector3d::Random();
    const hest::Matrix38d o = hest::odot(p);
    for (int k = 0; k < 8; ++k) {
      EXPECT_LT((o.col(k) - hest::wedge(basis(k)) * p).cwiseAbs().maxCoeff(), 1e-15);
    }
    const AlgebraVector x = random_xi(rng, 2.0);
    EXPECT_LT((o * x - hest::wedge(x) * p).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Odot, OpticalAxisPicksThirdColumn) {
  AlgebraVector x;
  x << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8;
  const Eigen::Vector3d got = hest::odot(Eigen::Vector3d::UnitZ()) * x;
  EXPECT_DOUBLE_EQ(got(0), 0.1);
  EXPECT_DOUBLE_EQ(got(1), -0.2);
  EXPECT_DOUBLE_EQ(got(2), -0.8);
}

TEST(RightJacobian, IdentityAtOrigin) {
  const Matrix8d j = hest::right_jacobian(AlgebraVector::Zero());
  EXPECT_LT((j - Matrix8d::Identity()).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(RightJacobian, FirstOrderComposition) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const AlgebraVector eps = random_xi(rng, 0.4);
    const Matrix8d j = hest::right_jacobian(eps);
    const AlgebraVector d = random_xi(rng, 1e-4);
    // exp(eps + d) = exp(eps) exp(J d) + O(|d|^2)
    const Eigen::Matrix3d lhs = hest::exp_sl3(hest::wedge(eps + d)).matrix();
    const Eigen::Matrix3d rhs = (hest::exp_sl3(hest::wedge(eps)) * hest::exp_sl3(hest::wedge(j * d))).matrix();
    const Eigen::Matrix3d zeroth = hest::exp_sl3(hest::wedge(eps)).matrix();
    const double residual = (lhs - rhs).norm();
    EXPECT_LT(residual, 1e-7);
    // The correction itself is first order, so the residual must be much smaller.
    EXPECT_LT(residual, 1e-2 * (lhs - zeroth).norm());
  }
}

TEST(RightJacobian, InvertibleInRegion) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix8d j = hest::right_jacobian(random_xi(rng, 0.5));
    const Eigen::JacobiSVD<Matrix8d> svd(j);
    const double cond = svd.singularValues()(0) / svd.singularValues()(7);
    EXPECT_TRUE(std::isfinite(cond));
    EXPECT_LT(cond, 1e3);
  }
}
