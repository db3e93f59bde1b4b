#pragma once

// SE(3) / SE(2) group elements with a minimal Euler-angle chart.
//
// Everything here is templated on the scalar so the same code is used for
// plain evaluation (double) and for forward-mode differentiation (Dual<N>).
// Perturbations are always applied on the left: X [+] d = v2t(d) * X.

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <type_traits>

#include "ils/errors.hpp"

namespace ils {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Value part of a scalar; overloaded for Dual in autodiff.hpp.
inline double scalar_value(double x) { return x; }

/// Chart validity radius: t2v refuses rotations whose cos(gamma) falls below.
inline constexpr double kGimbalThreshold = 1e-9;

/// Closest rotation (Frobenius norm) to a near-orthonormal matrix.
inline Eigen::Matrix3d closest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) = -u.col(2);
  return u * v.transpose();
}

template <typename Scalar>
Matrix3<Scalar> skew(const Vector3<Scalar>& p) {
  Matrix3<Scalar> s;
  // clang-format off
  s << Scalar(0), -p.z(),     p.y(),
       p.z(),     Scalar(0), -p.x(),
      -p.y(),     p.x(),     Scalar(0);
  // clang-format on
  return s;
}

/// Wraps an angle into (-pi, pi]. The shift is computed on the value only, so
/// derivatives pass through unchanged.
template <typename Scalar>
Scalar wrap_angle(const Scalar& theta) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double v = scalar_value(theta);
  const double k = std::ceil((v - std::numbers::pi) / kTwoPi);
  if (k == 0.0) return theta;
  return theta - Scalar(kTwoPi * k);
}

template <typename Scalar>
class Isometry3 {
 public:
  using Mat3 = Matrix3<Scalar>;
  using Vec3 = Vector3<Scalar>;

  Isometry3() : R_(Mat3::Identity()), t_(Vec3::Zero()) {}
  Isometry3(const Mat3& rotation, const Vec3& translation) : R_(rotation), t_(translation) {}

  static Isometry3 Identity() { return Isometry3(); }

  const Mat3& rotation() const { return R_; }
  const Vec3& translation() const { return t_; }
  Mat3& rotation() { return R_; }
  Vec3& translation() { return t_; }

  Eigen::Matrix<Scalar, 4, 4> matrix() const {
    Eigen::Matrix<Scalar, 4, 4> m = Eigen::Matrix<Scalar, 4, 4>::Identity();
    m.template block<3, 3>(0, 0) = R_;
    m.template block<3, 1>(0, 3) = t_;
    return m;
  }

  Isometry3 inverse() const {
    Mat3 rt = R_.transpose();
    return Isometry3(rt, -(rt * t_));
  }

  /// Group composition; for floating-point scalars the rotation is projected
  /// back onto SO(3) to stop drift.
  Isometry3 operator*(const Isometry3& other) const {
    Isometry3 out(R_ * other.R_, t_ + R_ * other.t_);
    out.orthonormalize();
    return out;
  }

  Vec3 operator*(const Vec3& p) const { return R_ * p + t_; }

  void orthonormalize() {
    if constexpr (std::is_floating_point_v<Scalar>) R_ = closest_rotation(R_);
  }

  template <typename T>
  Isometry3<T> cast() const {
    return Isometry3<T>(R_.template cast<T>(), t_.template cast<T>());
  }

 private:
  Mat3 R_;
  Vec3 t_;
};

using Isometry3d = Isometry3<double>;

/// 6-vector (dx, dy, dz, phi, gamma, psi) -> isometry with R = Rx(phi) Ry(gamma) Rz(psi).
template <typename Scalar>
Isometry3<Scalar> v2t(const Vector6<Scalar>& v) {
  using std::cos;
  using std::sin;
  const Scalar cphi = cos(v(3)), sphi = sin(v(3));
  const Scalar cgam = cos(v(4)), sgam = sin(v(4));
  const Scalar cpsi = cos(v(5)), spsi = sin(v(5));
  Matrix3<Scalar> r;
  r(0, 0) = cgam * cpsi;
  r(0, 1) = -cgam * spsi;
  r(0, 2) = sgam;
  r(1, 0) = cphi * spsi + sphi * cpsi * sgam;
  r(1, 1) = cphi * cpsi - sphi * sgam * spsi;
  r(1, 2) = -cgam * sphi;
  r(2, 0) = sphi * spsi - cphi * cpsi * sgam;
  r(2, 1) = sphi * cpsi + cphi * sgam * spsi;
  r(2, 2) = cgam * cphi;
  return Isometry3<Scalar>(r, v.template head<3>());
}

/// Inverse of v2t on |gamma| < pi/2. Throws GimbalLock at the chart boundary.
template <typename Scalar>
Vector6<Scalar> t2v(const Isometry3<Scalar>& x) {
  using std::atan2;
  using std::sqrt;
  const auto& r = x.rotation();
  const Scalar cos_gamma_sq = r(0, 0) * r(0, 0) + r(0, 1) * r(0, 1);
  if (!(std::sqrt(scalar_value(cos_gamma_sq)) > kGimbalThreshold)) {
    throw Error(ErrorCode::GimbalLock, "rotation at the Euler chart singularity (|gamma| = pi/2)");
  }
  Vector6<Scalar> v;
  v.template head<3>() = x.translation();
  v(3) = atan2(-r(1, 2), r(2, 2));
  v(5) = atan2(-r(0, 1), r(0, 0));
  v(4) = atan2(r(0, 2), sqrt(cos_gamma_sq));
  return v;
}

template <typename Scalar>
Isometry3<Scalar> boxplus(const Isometry3<Scalar>& x, const Vector6<Scalar>& d) {
  return v2t(d) * x;
}

/// Left-chart difference: xa = xb [+] (xa [-] xb).
template <typename Scalar>
Vector6<Scalar> boxminus(const Isometry3<Scalar>& xa, const Isometry3<Scalar>& xb) {
  return t2v(xa * xb.inverse());
}

// ---------------------------------------------------------------------------
// SE(2)
// ---------------------------------------------------------------------------

/// Planar isometry stored as (angle, translation); the angle is kept in (-pi, pi].
template <typename Scalar>
class Isometry2 {
 public:
  using Vec2 = Vector2<Scalar>;

  Isometry2() : theta_(Scalar(0)), t_(Vec2::Zero()) {}
  Isometry2(const Scalar& theta, const Vec2& translation)
      : theta_(wrap_angle(theta)), t_(translation) {}

  static Isometry2 Identity() { return Isometry2(); }

  const Scalar& angle() const { return theta_; }
  const Vec2& translation() const { return t_; }

  Matrix2<Scalar> rotation() const {
    using std::cos;
    using std::sin;
    Matrix2<Scalar> r;
    const Scalar c = cos(theta_), s = sin(theta_);
    r << c, -s, s, c;
    return r;
  }

  Eigen::Matrix<Scalar, 3, 3> matrix() const {
    Eigen::Matrix<Scalar, 3, 3> m = Eigen::Matrix<Scalar, 3, 3>::Identity();
    m.template block<2, 2>(0, 0) = rotation();
    m.template block<2, 1>(0, 2) = t_;
    return m;
  }

  Isometry2 inverse() const {
    Matrix2<Scalar> rt = rotation().transpose();
    return Isometry2(-theta_, -(rt * t_));
  }

  Isometry2 operator*(const Isometry2& other) const {
    return Isometry2(theta_ + other.theta_, t_ + rotation() * other.t_);
  }

  Vec2 operator*(const Vec2& p) const { return rotation() * p + t_; }

  template <typename T>
  Isometry2<T> cast() const {
    return Isometry2<T>(T(theta_), t_.template cast<T>());
  }

 private:
  Scalar theta_;
  Vec2 t_;
};

using Isometry2d = Isometry2<double>;

template <typename Scalar>
Isometry2<Scalar> v2t(const Vector3<Scalar>& v) {
  return Isometry2<Scalar>(v(2), v.template head<2>());
}

template <typename Scalar>
Vector3<Scalar> t2v(const Isometry2<Scalar>& x) {
  Vector3<Scalar> v;
  v.template head<2>() = x.translation();
  v(2) = x.angle();
  return v;
}

template <typename Scalar>
Isometry2<Scalar> boxplus(const Isometry2<Scalar>& x, const Vector3<Scalar>& d) {
  return v2t(d) * x;
}

template <typename Scalar>
Vector3<Scalar> boxminus(const Isometry2<Scalar>& xa, const Isometry2<Scalar>& xb) {
  return t2v(xa * xb.inverse());
}

}  // namespace ils
