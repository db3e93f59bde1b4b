#include <gtest/gtest.h>

#include "ils/factors.hpp"
#include "ils/solver.hpp"
#include "oracles.hpp"

using namespace ils;

namespace {

using D6 = Dual<6>;

CameraIntrinsics test_camera() { return CameraIntrinsics::pinhole(500, 480, 320, 240, 640, 480); }

/// Camera pose looking at the origin region from a random position.
Isometry3d random_camera(Rng& rng) {
  return Isometry3d(oracle::rodrigues(oracle::random_vector(rng, 0.2)), oracle::random_vector(rng, 0.5) -
                                                                            Eigen::Vector3d(0, 0, 5));
}

Eigen::Vector3d random_landmark(Rng& rng) { return oracle::random_vector(rng, 1.0); }

}  // namespace

TEST(Icp, ZeroAtCoincidentPoints) {
  const Eigen::Vector3d p(0.3, -1, 2);
  EXPECT_TRUE(icp_error<double>(Isometry3d(), p, p).isZero(0.0));
}

TEST(Icp, HandCase) {
  const Eigen::Vector3d pm(1, 0, 0);
  EXPECT_EQ(icp_error<double>(Isometry3d(), pm, Eigen::Vector3d::Zero()), pm);
  Eigen::Matrix<double, 3, 6> expected;
  expected << -Eigen::Matrix3d::Identity(), skew<double>(pm);
  EXPECT_EQ(icp_jacobian(Isometry3d(), pm), expected);
  const auto f = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
    return icp_error<double>(boxplus(Isometry3d(), Vector6d(d)), pm, Eigen::Vector3d::Zero());
  };
  EXPECT_LT(oracle::relative_error(expected, oracle::numeric_jacobian(f, Eigen::VectorXd::Zero(6))), 1e-9);
}

TEST(Icp, AnalyticMatchesAd) {
  Rng rng(61);
  for (int k = 0; k < 100; ++k) {
    const Isometry3d x = oracle::random_pose(rng);
    const Eigen::Vector3d pm = oracle::random_vector(rng, 3.0), pf = oracle::random_vector(rng, 3.0);
    const auto ad = jacobian_of<6>([&](const Vector6<D6>& d) {
      return icp_error<D6>(boxplus(x.cast<D6>(), d), pm.cast<D6>(), pf.cast<D6>());
    });
    EXPECT_LT((ad - icp_jacobian(x, pm)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Hom, Values) {
  EXPECT_EQ(hom<double>(Eigen::Vector3d(2, 4, 2)), Eigen::Vector2d(1, 2));
  Eigen::Matrix<double, 2, 3> expected;
  expected << 0.5, 0, -0.25, 0, 0.5, -0.5;
  EXPECT_EQ(hom_jacobian(Eigen::Vector3d(1, 2, 2)), expected);
  EXPECT_THROW(hom<double>(Eigen::Vector3d(1, 1, 1e-4), 1e-3), Error);
}

TEST(Hom, FiniteDifferences) {
  Rng rng(62);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector3d p(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.1, 4));
    const auto f = [](const Eigen::VectorXd& q) -> Eigen::VectorXd { return hom<double>(Eigen::Vector3d(q)); };
    EXPECT_LT((hom_jacobian(p) - oracle::numeric_jacobian(f, p, 1e-7 * p.z())).cwiseAbs().maxCoeff(), 1e-7 / p.z());
  }
}

TEST(Projective, ZeroAndInvalid) {
  const CameraIntrinsics cam;
  const auto e = proj_error<double>(Isometry3d(), cam, Eigen::Vector3d(0, 0, 1), Eigen::Vector2d::Zero());
  ASSERT_TRUE(e);
  EXPECT_TRUE(e->isZero(0.0));
  EXPECT_FALSE(proj_error<double>(Isometry3d(), cam, Eigen::Vector3d(0, 0, -1), Eigen::Vector2d::Zero()));
  EXPECT_FALSE(proj_error<double>(Isometry3d(), cam, Eigen::Vector3d(0, 0, 1e-4), Eigen::Vector2d::Zero()));
  const CameraIntrinsics bounded = test_camera();
  EXPECT_FALSE(proj_error<double>(Isometry3d(), bounded, Eigen::Vector3d(5, 0, 1), Eigen::Vector2d::Zero()));
  EXPECT_TRUE(proj_error<double>(Isometry3d(), bounded, Eigen::Vector3d(0.1, 0, 1), Eigen::Vector2d::Zero()));
  EXPECT_FALSE(proj_jacobian(Isometry3d(), cam, Eigen::Vector3d(0, 0, -1)));
}

TEST(Projective, ChainRuleMatchesAd) {
  Rng rng(63);
  const CameraIntrinsics cam = test_camera();
  int checked = 0;
  for (int k = 0; k < 100; ++k) {
    const Isometry3d x = random_camera(rng);
    const Eigen::Vector3d p = random_landmark(rng);
    const auto analytic = proj_jacobian(x, cam, p);
    if (!analytic) continue;
    const auto ad = jacobian_of<6>([&](const Vector6<D6>& d) {
      return *proj_error<D6>(boxplus(x.cast<D6>(), d), cam, p.cast<D6>(), Eigen::Vector2d::Zero());
    });
    const Eigen::Vector3d p_cam = cam.K * (x.rotation().transpose() * (p - x.translation()));
    const Eigen::Matrix<double, 2, 6> chain = hom_jacobian(p_cam) * cam.K * icp_jacobian(x, p);
    EXPECT_LT((*analytic - chain).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((*analytic - ad).cwiseAbs().maxCoeff(), 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 90);
}

TEST(Ba, ConsistentTripleHasZeroError) {
  Rng rng(64);
  const CameraIntrinsics cam = test_camera();
  const Isometry3d x = random_camera(rng);
  const Eigen::Vector3d l = random_landmark(rng);
  const Eigen::Vector3d p_cam = cam.K * (x.inverse() * l);
  const Eigen::Vector2d z = p_cam.head<2>() / p_cam.z();
  const auto e = ba_error<double>(x, l, cam, z);
  ASSERT_TRUE(e);
  EXPECT_LT(e->norm(), 1e-12);
}

TEST(Ba, LandmarkBlockAtIdentity) {
  const Eigen::Vector3d p(0.2, -0.4, 3.0);
  const auto j = ba_jacobians(Isometry3d(), p, CameraIntrinsics{});
  ASSERT_TRUE(j);
  EXPECT_EQ(j->landmark, hom_jacobian(p));
}

TEST(Ba, BothBlocksMatchAd) {
  Rng rng(65);
  const CameraIntrinsics cam = test_camera();
  using D9 = Dual<9>;
  for (int k = 0; k < 100; ++k) {
    const Isometry3d x = random_camera(rng);
    const Eigen::Vector3d l = random_landmark(rng);
    const auto analytic = ba_jacobians(x, l, cam);
    if (!analytic) continue;
    const auto ad = jacobian_of<9>([&](const Eigen::Matrix<D9, 9, 1>& d) {
      const Vector6<D9> dx = d.head<6>();
      const Vector3<D9> dl = d.tail<3>();
      return *ba_error<D9>(boxplus(x.cast<D9>(), dx), Vector3<D9>(l.cast<D9>() + dl), cam, Eigen::Vector2d::Zero());
    });
    EXPECT_LT((analytic->pose - ad.leftCols<6>()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((analytic->landmark - ad.rightCols<3>()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Ba, ScaleInvariance) {
  Rng rng(66);
  const CameraIntrinsics cam = test_camera();
  for (int k = 0; k < 20; ++k) {
    const Isometry3d x = random_camera(rng);
    const Eigen::Vector3d l = random_landmark(rng);
    const Eigen::Vector2d z(300, 250);
    const double s = rng.uniform(0.5, 3.0);
    const auto e1 = ba_error<double>(x, l, cam, z);
    const auto e2 = ba_error<double>(Isometry3d(x.rotation(), s * x.translation()), Eigen::Vector3d(s * l), cam, z);
    ASSERT_TRUE(e1 && e2);
    EXPECT_LT((*e1 - *e2).norm(), 1e-9);
  }
}

TEST(Pgo, HandCases) {
  Rng rng(67);
  const Isometry3d x = oracle::random_pose(rng);
  EXPECT_LT(pgo_error<double>(x, x, Isometry3d()).norm(), 1e-12);
  const Vector6d e = pgo_error<double>(Isometry3d(), v2t<double>((Vector6d() << 1, 0, 0, 0, 0, 0).finished()),
                                       Isometry3d());
  EXPECT_EQ(e, (Vector6d() << 1, 0, 0, 0, 0, 0).finished());
}

TEST(Pgo, AdMatchesFiniteDifferences) {
  Rng rng(68);
  for (int k = 0; k < 100; ++k) {
    const Isometry3d a = oracle::random_pose(rng), b = oracle::random_pose(rng);
    const Isometry3d z = oracle::random_pose(rng, 0.5, 0.4) * (a.inverse() * b);
    const PgoJacobians j = pgo_jacobians(a, b, z);
    const auto fa = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      return pgo_error<double>(boxplus(a, Vector6d(d)), b, z);
    };
    const auto fb = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      return pgo_error<double>(a, boxplus(b, Vector6d(d)), z);
    };
    EXPECT_LT(oracle::relative_error(j.from, oracle::numeric_jacobian(fa, Eigen::VectorXd::Zero(6))), 1e-6);
    EXPECT_LT(oracle::relative_error(j.to, oracle::numeric_jacobian(fb, Eigen::VectorXd::Zero(6))), 1e-6);
  }
}

TEST(Pgo, GaugeInvariance) {
  Rng rng(69);
  const Isometry3d t = oracle::random_pose(rng, 5.0, 3.0);
  for (int k = 0; k < 50; ++k) {
    const Isometry3d a = oracle::random_pose(rng), b = oracle::random_pose(rng);
    const Isometry3d z = oracle::random_pose(rng, 0.5, 0.4) * (a.inverse() * b);
    Matrix6d m = Matrix6d::Random();
    const Matrix6d omega = m * m.transpose();
    const Vector6d e1 = pgo_error<double>(a, b, z);
    const Vector6d e2 = pgo_error<double>(t * a, t * b, z);
    EXPECT_NEAR(e1.dot(omega * e1), e2.dot(omega * e2), 1e-9 * std::max(1.0, e1.dot(omega * e1)));
  }
}

TEST(Se2, ZeroAndPureTranslation) {
  const Isometry2d x(0.4, Eigen::Vector2d(1, 2));
  EXPECT_LT(se2_pgo_error<double>(x, x, Isometry2d()).norm(), 1e-15);
  EXPECT_TRUE(se2_landmark_error<double>(Isometry2d(), Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 2)).isZero(0.0));
  const Isometry2d a;
  const Isometry2d b(0.0, Eigen::Vector2d(2, 0));
  const Isometry2d z(0.0, Eigen::Vector2d(1.5, 0));
  EXPECT_LT((se2_pgo_error<double>(a, b, z) - Eigen::Vector3d(0.5, 0, 0)).norm(), 1e-15);
  const Isometry2d rotated(std::numbers::pi / 2, Eigen::Vector2d(1, 0));
  EXPECT_LT((se2_landmark_error<double>(rotated, Eigen::Vector2d(1, 3), Eigen::Vector2d::Zero()) -
             Eigen::Vector2d(3, 0))
                .norm(),
            1e-15);
}

TEST(Se2, AdMatchesFiniteDifferences) {
  Rng rng(70);
  for (int k = 0; k < 100; ++k) {
    const Isometry2d a(rng.uniform(-3, 3), Eigen::Vector2d(rng.uniform(-5, 5), rng.uniform(-5, 5)));
    const Isometry2d b(rng.uniform(-3, 3), Eigen::Vector2d(rng.uniform(-5, 5), rng.uniform(-5, 5)));
    const Isometry2d z = Isometry2d(rng.uniform(-0.3, 0.3), Eigen::Vector2d(0.1, -0.2)) * (a.inverse() * b);
    const Se2PgoJacobians j = se2_pgo_jacobians(a, b, z);
    const auto fa = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      return se2_pgo_error<double>(boxplus(a, Eigen::Vector3d(d)), b, z);
    };
    const auto fb = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      return se2_pgo_error<double>(a, boxplus(b, Eigen::Vector3d(d)), z);
    };
    EXPECT_LT(oracle::relative_error(j.from, oracle::numeric_jacobian(fa, Eigen::VectorXd::Zero(3))), 1e-6);
    EXPECT_LT(oracle::relative_error(j.to, oracle::numeric_jacobian(fb, Eigen::VectorXd::Zero(3))), 1e-6);

    const Eigen::Vector2d l(rng.uniform(-5, 5), rng.uniform(-5, 5)), zl(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Se2LandmarkJacobians jl = se2_landmark_jacobians(a, l, zl);
    const auto fp = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      return se2_landmark_error<double>(boxplus(a, Eigen::Vector3d(d)), l, zl);
    };
    const auto fl = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      return se2_landmark_error<double>(a, Eigen::Vector2d(l + d), zl);
    };
    EXPECT_LT(oracle::relative_error(jl.pose, oracle::numeric_jacobian(fp, Eigen::VectorXd::Zero(3))), 1e-6);
    EXPECT_LT(oracle::relative_error(jl.landmark, oracle::numeric_jacobian(fl, Eigen::VectorXd::Zero(2))), 1e-6);
  }
}

TEST(Factors, LinearizeAgreesWithFreeFunctions) {
  Rng rng(71);
  FactorGraph g;
  const Isometry3d x = random_camera(rng);
  const Eigen::Vector3d l = random_landmark(rng);
  g.add_variable(0, x);
  g.add_variable(1, l);
  g.add_variable(2, oracle::random_pose(rng));
  const CameraIntrinsics cam = test_camera();
  const FactorKey ba = g.add_factor(std::make_unique<BaFactor>(0, 1, cam, Eigen::Vector2d(300, 200)));
  const FactorKey pgo = g.add_factor(std::make_unique<Se3PgoFactor>(0, 2, Isometry3d()));
  const FactorKey icp = g.add_factor(std::make_unique<IcpFactor>(0, Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(0, 1, 0)));

  const auto lba = g.factor(ba).linearize(gather_values(g, g.factor(ba)));
  ASSERT_TRUE(lba);
  const auto jba = *ba_jacobians(x, l, cam);
  EXPECT_EQ(lba->jacobians[0], Eigen::MatrixXd(jba.pose));
  EXPECT_EQ(lba->jacobians[1], Eigen::MatrixXd(jba.landmark));

  const auto lpgo = g.factor(pgo).linearize(gather_values(g, g.factor(pgo)));
  ASSERT_TRUE(lpgo);
  const PgoJacobians jp = pgo_jacobians(x, std::get<Isometry3d>(g.variable(2).value), Isometry3d());
  EXPECT_EQ(lpgo->jacobians[0], Eigen::MatrixXd(jp.from));
  EXPECT_EQ(lpgo->jacobians[1], Eigen::MatrixXd(jp.to));

  const auto licp = g.factor(icp).linearize(gather_values(g, g.factor(icp)));
  EXPECT_EQ(licp->jacobians[0], Eigen::MatrixXd(icp_jacobian(x, Eigen::Vector3d(1, 2, 3))));
  EXPECT_EQ(g.factor(icp).type_tag(), "icp");
}

TEST(Factors, LinearFactorErrorAndKinds) {
  FactorGraph g;
  g.add_variable(0, 2.0);
  g.add_variable(1, Eigen::Vector2d(1, -1));
  Eigen::MatrixXd a0(2, 1), a1(2, 2);
  a0 << 1, 2;
  a1 << 1, 0, 3, 1;
  const FactorKey k = g.add_factor(std::make_unique<LinearFactor>(
      std::vector<VariableKey>{0, 1}, std::vector<Eigen::MatrixXd>{a0, a1}, Eigen::Vector2d(0.5, 0.5),
      Eigen::Vector2d(1, 1), Eigen::Matrix2d::Identity()));
  const auto e = g.factor(k).error(gather_values(g, g.factor(k)));
  ASSERT_TRUE(e);
  EXPECT_EQ(*e, Eigen::VectorXd(Eigen::Vector2d(2 + 1 + 0.5 - 1, 4 + 3 - 1 + 0.5 - 1)));
  EXPECT_EQ(g.factor(k).variable_kinds()[0], VariableKind::Scalar);
  EXPECT_EQ(g.factor(k).variable_kinds()[1], VariableKind::Point2);
}

TEST(Camera, Validation) {
  EXPECT_THROW(CameraIntrinsics::pinhole(1, 1, 0, 0, -1, 1), Error);
  CameraIntrinsics c;
  c.K(2, 0) = 1.0;
  EXPECT_THROW(c.validate(), Error);
}
