#pragma once

// Lie-algebra machinery for SL(3), the group of 3x3 matrices with unit
// determinant, and its algebra sl(3) of trace-free matrices.
//
// Coordinates on sl(3) use the basis
//
//            [ x4+x5   -x3+x6   x1  ]
//   wedge(x) [ x3+x6    x4-x5   x2  ]
//            [ x7       x8     -2x4 ]
//
// so that x3 carries in-plane rotation, x4/x5 anisotropic scale, x6 shear,
// x1/x2 translation and x7/x8 the projective terms.

#include <Eigen/Core>

namespace hest {

using AlgebraVector = Eigen::Matrix<double, 8, 1>;
using AlgebraMatrix = Eigen::Matrix3d;
using Matrix8d = Eigen::Matrix<double, 8, 8>;
using Matrix38d = Eigen::Matrix<double, 3, 8>;

/// Element of SL(3). Instances are produced by project_sl3(), exp_sl3() or
/// group operations, so det(matrix()) stays at 1 up to rounding.
class SL3 {
 public:
  SL3() : h_(Eigen::Matrix3d::Identity()) {}

  /// Wraps a matrix the caller already knows to lie on SL(3).
  static SL3 from_matrix_unchecked(const Eigen::Matrix3d& h) { return SL3(h); }

  const Eigen::Matrix3d& matrix() const { return h_; }
  SL3 inverse() const;
  SL3 operator*(const SL3& other) const { return SL3(h_ * other.h_); }

 private:
  explicit SL3(const Eigen::Matrix3d& h) : h_(h) {}
  Eigen::Matrix3d h_;
};

/// Options for log_sl3().
struct LogOptions {
  /// Largest spectral radius of (h - I) accepted. A non-positive value
  /// disables the radius check and only rejects matrices without a real
  /// principal logarithm (an eigenvalue on the closed negative real axis).
  double max_spectral_radius = 0.9;
};

/// Finite-difference options for right_jacobian().
struct JacobianOptions {
  double step = 1e-6;
  LogOptions log{};
};

AlgebraMatrix wedge(const AlgebraVector& xi);

/// Inverse of wedge(). Throws InvalidAlgebraElement when |trace(m)| exceeds
/// 1e-12 relative to max(1, |m|).
AlgebraVector vee(const AlgebraMatrix& m);

/// 3x3 skew-symmetric matrix of w.
Eigen::Matrix3d skew(const Eigen::Vector3d& w);

SL3 exp_sl3(const AlgebraMatrix& m);

/// Principal logarithm by inverse scaling and squaring. Throws
/// LogDomainError outside the region selected by `options`.
AlgebraMatrix log_sl3(const SL3& h, const LogOptions& options = {});

/// Convenience composition vee(log_sl3(h)).
AlgebraVector log_vee(const SL3& h, const LogOptions& options = {});

/// x / det(x)^(1/3). Throws ProjectionError when det(x) <= 0.
SL3 project_sl3(const Eigen::Matrix3d& x);

/// Matrix of the adjoint action: adjoint_matrix(h) * xi == vee(h wedge(xi) h^-1).
Matrix8d adjoint_matrix(const SL3& h);

/// Matrix of the Lie bracket: little_adjoint(a) * b == vee([wedge(a), wedge(b)]).
Matrix8d little_adjoint(const AlgebraVector& xi);

/// odot(p) * xi == wedge(xi) * p.
Matrix38d odot(const Eigen::Vector3d& p);

/// Right group Jacobian by backward finite differences:
///   exp(wedge(eps + d)) ~= exp(wedge(eps)) exp(wedge(J(eps) d)).
Matrix8d right_jacobian(const AlgebraVector& eps, const JacobianOptions& options = {});

}  // namespace hest
