#include "hest/sl3.hpp"

#include "hest/errors.hpp"
#include "hest/matrix_exp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hest {

namespace {

constexpr int kMaxSquareRoots = 40;
constexpr int kMaxDenmanBeaversIters = 60;

// Denman-Beavers iteration for the principal square root.
Eigen::Matrix3d sqrtm(const Eigen::Matrix3d& x) {
  Eigen::Matrix3d y = x;
  Eigen::Matrix3d z = Eigen::Matrix3d::Identity();
  for (int i = 0; i < kMaxDenmanBeaversIters; ++i) {
    const Eigen::Matrix3d y_next = 0.5 * (y + z.inverse());
    const Eigen::Matrix3d z_next = 0.5 * (z + y.inverse());
    const double change = (y_next - y).cwiseAbs().maxCoeff();
    y = y_next;
    z = z_next;
    if (change <= 1e-16 * std::max(1.0, y.cwiseAbs().maxCoeff())) {
      break;
    }
  }
  return y;
}

double one_norm(const Eigen::Matrix3d& m) { return m.cwiseAbs().colwise().sum().maxCoeff(); }

void check_log_domain(const Eigen::Matrix3d& h, const LogOptions& options) {
  const Eigen::EigenSolver<Eigen::Matrix3d> solver(h, false);
  const Eigen::Vector3cd lambda = solver.eigenvalues();
  double radius = 0.0;
  for (int i = 0; i < 3; ++i) {
    const std::complex<double> l = lambda(i);
    radius = std::max(radius, std::abs(l - 1.0));
    const bool on_negative_axis =
        l.real() <= 0.0 && std::abs(l.imag()) <= 1e-12 * std::max(1.0, std::abs(l));
    if (on_negative_axis) {
      throw LogDomainError("log_sl3: eigenvalue on the closed negative real axis");
    }
  }
  if (options.max_spectral_radius > 0.0 && radius > options.max_spectral_radius) {
    std::ostringstream msg;
    msg << "log_sl3: spectral radius of h - I is " << radius << ", limit "
        << options.max_spectral_radius;
    throw LogDomainError(msg.str());
  }
}

}  // namespace

SL3 SL3::inverse() const { return SL3(h_.inverse()); }

AlgebraMatrix wedge(const AlgebraVector& xi) {
  AlgebraMatrix m;
  m << xi(3) + xi(4), -xi(2) + xi(5), xi(0),
       xi(2) + xi(5), xi(3) - xi(4), xi(1),
       xi(6), xi(7), -2.0 * xi(3);
  return m;
}

AlgebraVector vee(const AlgebraMatrix& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (std::abs(m.trace()) > 1e-12 * scale) {
    std::ostringstream msg;
    msg << "vee: matrix is not trace-free (trace " << m.trace() << ")";
    throw InvalidAlgebraElement(msg.str());
  }
  AlgebraVector xi;
  xi(0) = m(0, 2);
  xi(1) = m(1, 2);
  xi(2) = 0.5 * (m(1, 0) - m(0, 1));
  xi(3) = 0.25 * (m(0, 0) + m(1, 1) - m(2, 2));
  xi(4) = 0.5 * (m(0, 0) - m(1, 1));
  xi(5) = 0.5 * (m(1, 0) + m(0, 1));
  xi(6) = m(2, 0);
  xi(7) = m(2, 1);
  return xi;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return s;
}

SL3 exp_sl3(const AlgebraMatrix& m) { return SL3::from_matrix_unchecked(expm(m)); }

AlgebraMatrix log_sl3(const SL3& h, const LogOptions& options) {
  const Eigen::Matrix3d identity = Eigen::Matrix3d::Identity();
  check_log_domain(h.matrix(), options);

  Eigen::Matrix3d x = h.matrix();
  int roots = 0;
  while (one_norm(x - identity) > 0.25) {
    if (roots == kMaxSquareRoots) {
      throw LogDomainError("log_sl3: square-root iteration did not reach the identity");
    }
    x = sqrtm(x);
    ++roots;
  }

  // log(x) = 2 atanh(z), z = (x - I)(x + I)^-1, summed over odd powers.
  const Eigen::Matrix3d z = (x - identity) * (x + identity).inverse();
  const Eigen::Matrix3d z2 = z * z;
  Eigen::Matrix3d power = z;
  Eigen::Matrix3d sum = z;
  for (int k = 1; k < 60; ++k) {
    power = (power * z2).eval();
    const Eigen::Matrix3d term = power / static_cast<double>(2 * k + 1);
    sum += term;
    if (term.cwiseAbs().maxCoeff() <= 1e-18 * std::max(1e-300, sum.cwiseAbs().maxCoeff())) {
      break;
    }
  }
  AlgebraMatrix result = 2.0 * std::ldexp(1.0, roots) * sum;
  result -= (result.trace() / 3.0) * identity;
  return result;
}

AlgebraVector log_vee(const SL3& h, const LogOptions& options) { return vee(log_sl3(h, options)); }

SL3 project_sl3(const Eigen::Matrix3d& x) {
  const double det = x.determinant();
  if (!(det > 0.0) || !std::isfinite(det)) {
    std::ostringstream msg;
    msg << "project_sl3: determinant " << det << " is not positive";
    throw ProjectionError(msg.str());
  }
  return SL3::from_matrix_unchecked(x / std::cbrt(det));
}

Matrix8d adjoint_matrix(const SL3& h) {
  const Eigen::Matrix3d& hm = h.matrix();
  const Eigen::Matrix3d h_inv = hm.inverse();
  Matrix8d ad;
  for (int k = 0; k < 8; ++k) {
    const Eigen::Matrix3d conj = hm * wedge(AlgebraVector::Unit(k)) * h_inv;
    // Conjugation preserves the trace only up to rounding.
    ad.col(k) = vee(conj - (conj.trace() / 3.0) * Eigen::Matrix3d::Identity());
  }
  return ad;
}

Matrix8d little_adjoint(const AlgebraVector& xi) {
  const AlgebraMatrix x = wedge(xi);
  Matrix8d ad;
  for (int k = 0; k < 8; ++k) {
    const AlgebraMatrix e = wedge(AlgebraVector::Unit(k));
    ad.col(k) = vee(x * e - e * x);
  }
  return ad;
}

Matrix38d odot(const Eigen::Vector3d& p) {
  Matrix38d m;
  m << p(2), 0.0, -p(1), p(0), p(0), p(1), 0.0, 0.0,
       0.0, p(2), p(0), p(1), -p(1), p(0), 0.0, 0.0,
       0.0, 0.0, 0.0, -2.0 * p(2), 0.0, 0.0, p(0), p(1);
  return m;
}

Matrix8d right_jacobian(const AlgebraVector& eps, const JacobianOptions& options) {
  const SL3 at = exp_sl3(wedge(eps));
  Matrix8d jac;
  for (int k = 0; k < 8; ++k) {
    AlgebraVector back = eps;
    back(k) -= options.step;
    // exp(-(eps - d e_k)) exp(eps) = exp(d J e_k) to first order in d.
    jac.col(k) = log_vee(exp_sl3(-wedge(back)) * at, options.log) / options.step;
  }
  return jac;
}

}  // namespace hest
