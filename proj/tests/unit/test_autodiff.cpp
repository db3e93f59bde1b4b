#include <gtest/gtest.h>

#include "ils/autodiff.hpp"
#include "ils/factors.hpp"
#include "oracles.hpp"

using namespace ils;

using D1 = Dual<1>;
using D2 = Dual<2>;

TEST(Dual, Square) {
  const D1 x = D1::variable(3.0, 0);
  const D1 y = x * x;
  EXPECT_DOUBLE_EQ(y.v, 9.0);
  EXPECT_DOUBLE_EQ(y.d(0), 6.0);
}

TEST(Dual, SinAtZero) {
  const D1 y = sin(D1::variable(0.0, 0));
  EXPECT_DOUBLE_EQ(y.v, 0.0);
  EXPECT_DOUBLE_EQ(y.d(0), 1.0);
}

TEST(Dual, ArithmeticRules) {
  const D2 a = D2::variable(1.5, 0);
  const D2 b = D2::variable(-0.5, 1);
  const D2 s = a + b, p = a * b, q = a / b, m = a - 2.0 * b;
  EXPECT_DOUBLE_EQ(s.d(0), 1.0);
  EXPECT_DOUBLE_EQ(s.d(1), 1.0);
  EXPECT_DOUBLE_EQ(p.d(0), -0.5);
  EXPECT_DOUBLE_EQ(p.d(1), 1.5);
  EXPECT_DOUBLE_EQ(q.v, -3.0);
  EXPECT_DOUBLE_EQ(q.d(0), 1.0 / -0.5);
  EXPECT_DOUBLE_EQ(q.d(1), -1.5 / 0.25);
  EXPECT_DOUBLE_EQ(m.d(1), -2.0);
}

TEST(Dual, ChainRule) {
  const D1 x = D1::variable(0.7, 0);
  const D1 y = cos(sqrt(x * x + 1.0));
  const double r = std::sqrt(0.49 + 1.0);
  EXPECT_NEAR(y.d(0), -std::sin(r) * 0.7 / r, 1e-15);
}

TEST(Dual, Atan2MatchesFiniteDifferences) {
  const D2 y = D2::variable(1.0, 0);
  const D2 x = D2::variable(1.0, 1);
  const D2 a = atan2(y, x);
  const double h = 1e-6;
  const double dy = (std::atan2(1.0 + h, 1.0) - std::atan2(1.0 - h, 1.0)) / (2 * h);
  const double dx = (std::atan2(1.0, 1.0 + h) - std::atan2(1.0, 1.0 - h)) / (2 * h);
  EXPECT_NEAR(a.d(0), dy, 1e-9);
  EXPECT_NEAR(a.d(1), dx, 1e-9);
}

TEST(Dual, AbsAndSqrt) {
  const D1 n = abs(D1::variable(-2.0, 0));
  EXPECT_DOUBLE_EQ(n.v, 2.0);
  EXPECT_DOUBLE_EQ(n.d(0), -1.0);
  const D1 s = sqrt(D1::variable(4.0, 0));
  EXPECT_DOUBLE_EQ(s.d(0), 0.25);
}

TEST(Dual, SingularitiesThrow) {
  const D1 zero = D1::variable(0.0, 0);
  EXPECT_THROW(D1(1.0) / D1(0.0), Error);
  EXPECT_THROW(sqrt(zero), Error);
  EXPECT_THROW(sqrt(D1::variable(-1.0, 0)), Error);
  EXPECT_THROW(atan2(zero, zero), Error);
  try {
    (void)(D1(1.0) / zero);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DivByZero);
  }
}

TEST(JacobianOf, Identity) {
  const auto j = jacobian_of<4>([](const auto& x) { return x; });
  EXPECT_TRUE(j.isIdentity(0.0));
}

TEST(JacobianOf, IcpErrorMatchesClosedForm) {
  Rng rng(21);
  for (int k = 0; k < 100; ++k) {
    const Isometry3d x = oracle::random_pose(rng);
    const Eigen::Vector3d pm = oracle::random_vector(rng, 3.0);
    const Eigen::Vector3d pf = oracle::random_vector(rng, 3.0);
    const auto ad = jacobian_of<6>([&](const Vector6<Dual<6>>& d) {
      const Isometry3<Dual<6>> xd = boxplus(x.cast<Dual<6>>(), d);
      return icp_error<Dual<6>>(xd, pm.cast<Dual<6>>(), pf.cast<Dual<6>>());
    });
    Eigen::Matrix<double, 3, 6> closed;
    closed << Eigen::Matrix3d::Identity(), -skew(pm);
    closed = -x.rotation().transpose() * closed;
    EXPECT_LT((ad - closed).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(JacobianOf, HomMatchesClosedForm) {
  Rng rng(22);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector3d p(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.2, 5));
    const auto ad = jacobian_of<3>([](const Vector3<Dual<3>>& q) { return hom<Dual<3>>(q); }, p);
    Eigen::Matrix<double, 2, 3> closed;
    closed << 1 / p.z(), 0, -p.x() / (p.z() * p.z()), 0, 1 / p.z(), -p.y() / (p.z() * p.z());
    EXPECT_LT((ad - closed).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(JacobianOf, EigenExpressionsWork) {
  const Eigen::Vector3d x0(1.0, 2.0, 3.0);
  const auto j = jacobian_of<3>(
      [](const Vector3<Dual<3>>& x) {
        Eigen::Matrix<Dual<3>, 1, 1> out;
        out(0) = x.squaredNorm();
        return out;
      },
      x0);
  EXPECT_LT((j.transpose() - 2.0 * x0).norm(), 1e-15);
}
