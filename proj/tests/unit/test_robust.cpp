#include <gtest/gtest.h>

#include <cmath>

#include "ils/errors.hpp"
#include "ils/robust.hpp"

using namespace ils;

namespace {

const Kernel kKernels[] = {Kernel::quadratic(), Kernel::huber(1.0), Kernel::cauchy(1.0),
                           Kernel::geman_mcclure(1.0), Kernel::saturated(1.0), Kernel::huber(2.5),
                           Kernel::cauchy(0.3)};

double numeric_derivative(const Kernel& k, double u) {
  const double h = 1e-6 * std::max(1.0, u);
  return (kernel_rho(k, u + h) - kernel_rho(k, u - h)) / (2.0 * h);
}

}  // namespace

TEST(Robustify, QuadraticIsUnitWeight) {
  for (double chi2 : {0.0, 0.5, 4.0, 1e6}) {
    const Robustified r = robustify(Kernel::quadratic(), chi2);
    EXPECT_EQ(r.gamma, 1.0);
    EXPECT_DOUBLE_EQ(r.rho, 0.5 * chi2);
  }
}

TEST(Robustify, HuberHandCase) {
  const Robustified r = robustify(Kernel::huber(1.0), 4.0);
  EXPECT_DOUBLE_EQ(r.gamma, 0.5);
  EXPECT_DOUBLE_EQ(r.rho, 1.5);
}

TEST(Robustify, LimitAtZero) {
  for (const Kernel& k : kKernels) {
    const Robustified r = robustify(k, 0.0);
    EXPECT_EQ(r.gamma, 1.0) << kernel_name(k.kind);
    EXPECT_EQ(r.rho, 0.0);
  }
}

TEST(Robustify, GammaTimesUIsDerivative) {
  for (const Kernel& k : kKernels) {
    const double c = k.threshold;
    for (int i = 1; i <= 1000; ++i) {
      const double u = 0.01 * c * i;
      if (k.kind != KernelKind::Quadratic && std::abs(u - c) < 1e-4) continue;
      const double analytic = robustify(k, u * u).gamma * u;
      EXPECT_NEAR(analytic, numeric_derivative(k, u), 1e-8) << kernel_name(k.kind) << " u=" << u;
    }
  }
}

TEST(Robustify, GammaNonIncreasing) {
  for (const Kernel& k : {Kernel::huber(1.0), Kernel::cauchy(1.0), Kernel::geman_mcclure(1.0)}) {
    double previous = robustify(k, 0.0).gamma;
    for (int i = 1; i <= 500; ++i) {
      const double u = 0.02 * i;
      const double g = robustify(k, u * u).gamma;
      EXPECT_LE(g, previous);
      EXPECT_GT(g, 0.0);
      previous = g;
    }
  }
}

TEST(Robustify, RhoMonotoneFromZero) {
  for (const Kernel& k : kKernels) {
    double previous = 0.0;
    for (int i = 0; i <= 500; ++i) {
      const double rho = kernel_rho(k, 0.02 * i);
      EXPECT_GE(rho, previous);
      previous = rho;
    }
  }
}

TEST(Robustify, SaturatedFlatPastThreshold) {
  const Robustified r = robustify(Kernel::saturated(1.0), 9.0);
  EXPECT_EQ(r.gamma, 0.0);
  EXPECT_DOUBLE_EQ(r.rho, 0.5);
}

TEST(Kernel, ParseAndFormat) {
  EXPECT_EQ(parse_kernel("huber:1.0"), Kernel::huber(1.0));
  EXPECT_EQ(parse_kernel("Cauchy:0.5"), Kernel::cauchy(0.5));
  EXPECT_EQ(parse_kernel("geman-mcclure:2"), Kernel::geman_mcclure(2.0));
  EXPECT_EQ(parse_kernel("quadratic"), Kernel::quadratic());
  EXPECT_EQ(format_kernel(Kernel::saturated(0.25)), "saturated:0.25");
  EXPECT_EQ(parse_kernel(format_kernel(Kernel::huber(1.5))), Kernel::huber(1.5));
  EXPECT_THROW(parse_kernel("huber"), Error);
  EXPECT_THROW(parse_kernel("huber:-1"), Error);
  EXPECT_THROW(parse_kernel("huber:x"), Error);
  EXPECT_THROW(parse_kernel("tukey:1"), Error);
}

TEST(Policy, RulesAndFallback) {
  RobustifierPolicy policy;
  EXPECT_EQ(policy.kernel_for("pgo3"), Kernel::quadratic());
  policy.set_rule("pgo3", Kernel::huber(1.0));
  EXPECT_EQ(policy.kernel_for("pgo3"), Kernel::huber(1.0));
  EXPECT_EQ(policy.kernel_for("icp"), Kernel::quadratic());
  policy.set_fallback(Kernel::cauchy(2.0));
  EXPECT_EQ(policy.kernel_for("icp"), Kernel::cauchy(2.0));
  EXPECT_THROW(policy.set_rule("icp", Kernel{KernelKind::Huber, 0.0}), Error);
}
