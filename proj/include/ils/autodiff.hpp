#pragma once

// Forward-mode automatic differentiation with a fixed-length partials vector.
//
// Dual<N> carries a value and the N partial derivatives with respect to the
// seeded perturbation coordinates. It plugs into Eigen as a scalar type, so
// the templated manifold and factor code evaluates Jacobians unchanged.

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <type_traits>

#include "ils/errors.hpp"

namespace ils {

inline constexpr double kDualDivisionGuard = 1e-300;

template <int N>
struct Dual {
  static_assert(N > 0, "Dual needs at least one partial");
  using Partials = Eigen::Matrix<double, N, 1>;

  double v = 0.0;
  Partials d = Partials::Zero();

  Dual() = default;
  Dual(double value) : v(value), d(Partials::Zero()) {}  // NOLINT: implicit for Eigen
  Dual(double value, const Partials& partials) : v(value), d(partials) {}

  /// Independent variable seeded with a unit partial at `index`.
  static Dual variable(double value, int index) {
    Dual x(value);
    x.d(index) = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { *this = *this * o; return *this; }
  Dual& operator/=(const Dual& o) { *this = *this / o; return *this; }

  friend Dual operator+(const Dual& a) { return a; }
  friend Dual operator-(const Dual& a) { return Dual(-a.v, -a.d); }

  friend Dual operator+(const Dual& a, const Dual& b) { return Dual(a.v + b.v, a.d + b.d); }
  friend Dual operator-(const Dual& a, const Dual& b) { return Dual(a.v - b.v, a.d - b.d); }
  friend Dual operator*(const Dual& a, const Dual& b) {
    return Dual(a.v * b.v, b.v * a.d + a.v * b.d);
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    if (std::abs(b.v) < kDualDivisionGuard) throw Error(ErrorCode::DivByZero, "dual division by zero");
    const double inv = 1.0 / b.v;
    return Dual(a.v * inv, (a.d - (a.v * inv) * b.d) * inv);
  }

  friend Dual operator+(const Dual& a, double b) { return Dual(a.v + b, a.d); }
  friend Dual operator+(double a, const Dual& b) { return Dual(a + b.v, b.d); }
  friend Dual operator-(const Dual& a, double b) { return Dual(a.v - b, a.d); }
  friend Dual operator-(double a, const Dual& b) { return Dual(a - b.v, -b.d); }
  friend Dual operator*(const Dual& a, double b) { return Dual(a.v * b, a.d * b); }
  friend Dual operator*(double a, const Dual& b) { return Dual(a * b.v, a * b.d); }
  friend Dual operator/(const Dual& a, double b) { return a / Dual(b); }
  friend Dual operator/(double a, const Dual& b) { return Dual(a) / b; }

  friend bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
  friend bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
  friend bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }
  friend bool operator==(const Dual& a, const Dual& b) { return a.v == b.v; }
  friend bool operator!=(const Dual& a, const Dual& b) { return a.v != b.v; }
};

template <int N>
double scalar_value(const Dual<N>& x) {
  return x.v;
}

template <int N>
Dual<N> sin(const Dual<N>& x) {
  return Dual<N>(std::sin(x.v), std::cos(x.v) * x.d);
}

template <int N>
Dual<N> cos(const Dual<N>& x) {
  return Dual<N>(std::cos(x.v), -std::sin(x.v) * x.d);
}

template <int N>
Dual<N> sqrt(const Dual<N>& x) {
  if (x.v < 0.0) throw Error(ErrorCode::DomainError, "sqrt of a negative dual");
  if (x.v < kDualDivisionGuard) {
    if (x.d.isZero(0.0)) return Dual<N>(0.0);
    throw Error(ErrorCode::DivByZero, "sqrt derivative is unbounded at zero");
  }
  const double s = std::sqrt(x.v);
  return Dual<N>(s, x.d * (0.5 / s));
}

template <int N>
Dual<N> atan2(const Dual<N>& y, const Dual<N>& x) {
  const double r2 = x.v * x.v + y.v * y.v;
  if (r2 < kDualDivisionGuard) throw Error(ErrorCode::DivByZero, "atan2 at the origin");
  return Dual<N>(std::atan2(y.v, x.v), (x.v * y.d - y.v * x.d) / r2);
}

template <int N>
Dual<N> abs(const Dual<N>& x) {
  return x.v < 0.0 ? -x : x;
}

template <int N>
Dual<N> abs2(const Dual<N>& x) {
  return x * x;
}

template <int N>
bool isfinite(const Dual<N>& x) {
  return std::isfinite(x.v) && x.d.allFinite();
}

// Eigen scalar hooks.
template <int N>
const Dual<N>& conj(const Dual<N>& x) {
  return x;
}
template <int N>
const Dual<N>& real(const Dual<N>& x) {
  return x;
}
template <int N>
Dual<N> imag(const Dual<N>&) {
  return Dual<N>(0.0);
}

/// Seeds `x0` as N independent variables.
template <int N>
Eigen::Matrix<Dual<N>, N, 1> seed(const Eigen::Matrix<double, N, 1>& x0) {
  Eigen::Matrix<Dual<N>, N, 1> x;
  for (int i = 0; i < N; ++i) x(i) = Dual<N>::variable(x0(i), i);
  return x;
}

/// Splits a vector of duals into its value and its M x N Jacobian.
template <int N, int M>
void split(const Eigen::Matrix<Dual<N>, M, 1>& y, Eigen::Matrix<double, M, 1>* value,
           Eigen::Matrix<double, M, N>* jacobian) {
  if (value) value->resize(y.rows());
  if (jacobian) jacobian->resize(y.rows(), N);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    if (value) (*value)(r) = y(r).v;
    if (jacobian) jacobian->row(r) = y(r).d.transpose();
  }
}

/// Jacobian of f at x0. `f` maps an N-vector of duals to an M-vector of duals.
template <int N, typename F>
auto jacobian_of(F&& f, const Eigen::Matrix<double, N, 1>& x0 = Eigen::Matrix<double, N, 1>::Zero()) {
  const auto y = f(seed<N>(x0));
  using Result = std::decay_t<decltype(y)>;
  constexpr int M = Result::RowsAtCompileTime;
  Eigen::Matrix<double, M, N> jac;
  split<N, M>(Eigen::Matrix<Dual<N>, M, 1>(y), nullptr, &jac);
  return jac;
}

}  // namespace ils

namespace Eigen {

template <int N>
struct NumTraits<ils::Dual<N>> : GenericNumTraits<ils::Dual<N>> {
  using Real = ils::Dual<N>;
  using NonInteger = ils::Dual<N>;
  using Nested = ils::Dual<N>;
  using Literal = ils::Dual<N>;

  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 1,
    MulCost = 3,
  };

  static inline Real epsilon() { return Real(std::numeric_limits<double>::epsilon()); }
  static inline Real dummy_precision() { return Real(1e-12); }
  static inline Real highest() { return Real(std::numeric_limits<double>::max()); }
  static inline Real lowest() { return Real(std::numeric_limits<double>::lowest()); }
  static inline int digits10() { return NumTraits<double>::digits10(); }
};

template <int N, typename BinaryOp>
struct ScalarBinaryOpTraits<ils::Dual<N>, double, BinaryOp> {
  using ReturnType = ils::Dual<N>;
};

template <int N, typename BinaryOp>
struct ScalarBinaryOpTraits<double, ils::Dual<N>, BinaryOp> {
  using ReturnType = ils::Dual<N>;
};

}  // namespace Eigen
