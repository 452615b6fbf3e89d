#include <gtest/gtest.h>

#include <cmath>

#include "rwdre/error.hpp"
#include "rwdre/kernel.hpp"

using namespace rwdre;
using namespace rwdre::kernel;

TEST(Kernel, StepDistributionExamples) {
  const auto a = step_distribution(1.0);
  EXPECT_EQ(a.zero, 1.0);
  EXPECT_EQ(a.plus, 0.0);
  const auto b = step_distribution(0.0);
  EXPECT_EQ(b.minus, 0.5);
  EXPECT_EQ(b.plus, 0.5);
  const auto c = step_distribution(0.5);
  EXPECT_EQ(c.mass(-1), 0.25);
  EXPECT_EQ(c.mass(0), 0.5);
  EXPECT_EQ(c.mass(1), 0.25);
  EXPECT_EQ(c.mass(2), 0.0);
  EXPECT_THROW(step_distribution(-0.1), ParameterError);
  EXPECT_THROW(step_distribution(1.5), ParameterError);
}

TEST(Kernel, SmallN) {
  const auto k0 = heat_kernel(0.5, 0);
  EXPECT_EQ(k0(0), 1.0);
  EXPECT_EQ(k0(1), 0.0);
  const auto k1 = heat_kernel(0.5, 1);
  EXPECT_EQ(k1(0), 0.5);
  EXPECT_EQ(k1(1), 0.25);
  EXPECT_EQ(k1(-1), 0.25);
  EXPECT_DOUBLE_EQ(heat_kernel(0.5, 2)(0), 0.375);
}

TEST(Kernel, NormalizationSymmetrySupport) {
  for (double q : {0.0, 0.13, 0.5, 0.77, 1.0}) {
    for (int n : {1, 7, 64, 255, 256}) {
      const auto k = heat_kernel(q, n);
      EXPECT_LE(std::abs(k.sum() - 1.0), 1e-12) << q << " " << n;
      for (int x = 0; x <= n + 2; ++x) EXPECT_EQ(k(x), k(-x));
      EXPECT_EQ(k(n + 1), 0.0);
      EXPECT_EQ(k(-n - 3), 0.0);
    }
  }
}

TEST(Kernel, ExactRationalNormalizationAndAgreement) {
  for (int n : {1, 10, 33, 64}) {
    const auto ex = heat_kernel_exact(0.375, n);
    Rational s = 0;
    for (const auto& v : ex) s += v;
    EXPECT_EQ(s, Rational(1));
    const auto k = heat_kernel(0.375, n);
    for (int x = -n; x <= n; ++x)
      EXPECT_NEAR(k(x), static_cast<double>(ex[static_cast<std::size_t>(x + n)]), 1e-15);
  }
  EXPECT_THROW(heat_kernel_exact(0.5, 65), ParameterError);
}

TEST(Kernel, SemigroupExact) {
  // exact rational convolution against the directly computed exact kernel
  const double q = 0.25;
  for (int m : {1, 5, 16, 32}) {
    for (int n : {2, 9, 32}) {
      const auto a = heat_kernel_exact(q, m), b = heat_kernel_exact(q, n), c = heat_kernel_exact(q, m + n);
      for (int x = -(m + n); x <= m + n; ++x) {
        Rational s = 0;
        for (int y = -m; y <= m; ++y) {
          const int z = x - y;
          if (z < -n || z > n) continue;
          s += a[static_cast<std::size_t>(y + m)] * b[static_cast<std::size_t>(z + n)];
        }
        ASSERT_EQ(s, c[static_cast<std::size_t>(x + m + n)]) << m << " " << n << " " << x;
      }
      const auto conv = convolve(heat_kernel(q, m), heat_kernel(q, n));
      const auto direct = heat_kernel(q, m + n);
      for (int x = -(m + n); x <= m + n; ++x)
        EXPECT_NEAR(conv[static_cast<std::size_t>(x + m + n)], direct(x), 1e-15);
    }
  }
}

TEST(Kernel, BoundReportHalfLazy) {
  const auto r = kernel_bound_report(0.5, 512, 0.1);
  EXPECT_TRUE(r.hypotheses_ok);
  EXPECT_TRUE(r.all_finite);
  EXPECT_TRUE(r.local_bounded);
  EXPECT_TRUE(r.smooth_bounded);
  EXPECT_TRUE(r.tail_bounded);
  // local CLT limit (2 pi sigma^2)^{-1/2} with sigma^2 = 1/2
  EXPECT_NEAR(r.rows.back().sup_scaled, 1.0 / std::sqrt(M_PI), 2e-3);
  // exact tail at n=4: P(|Z_4| > 2 log 4) = 2 (p(3) + p(4)) = 9/128
  EXPECT_DOUBLE_EQ(r.rows[3].tail, 9.0 / 128.0);
}

TEST(Kernel, BoundReportFlagsPureHolding) {
  const auto r = kernel_bound_report(1.0, 64, 0.1);
  EXPECT_FALSE(r.hypotheses_ok);
  EXPECT_FALSE(r.local_bounded);
  EXPECT_NEAR(r.rows.back().sup_scaled, 8.0, 1e-12);
}

TEST(Kernel, PavingGeometry) {
  const Paving p(interval_sites(-16, 16), 4);
  EXPECT_EQ(p.offset(), -16);
  ASSERT_EQ(p.indices().size(), 9u);
  EXPECT_EQ(p.segment_start(p.indices().front()), -16);
  EXPECT_EQ(p.segment_of(-17), -1);
  EXPECT_EQ(p.segment_of(-16), 0);
  EXPECT_EQ(p.segment_of(16), 8);
  const Paving off(interval_sites(0, 9), 5, -2);
  EXPECT_EQ(off.segment_of(-2), 0);
  EXPECT_EQ(off.segment_of(-3), -1);
  EXPECT_EQ(off.indices().size(), 3u);
}

TEST(Kernel, PavingFullCoverage) {
  const auto k = heat_kernel(0.5, 30);
  const auto H = interval_sites(-10, 10);
  const Paving p(H, 3);
  const auto r = paving_integral_check(k, p, H, 1.0, 0.0);
  EXPECT_NEAR(r.lhs, r.target_mass, 1e-15);
  EXPECT_TRUE(r.holds);
  EXPECT_TRUE(paving_integral_check(k, p, H, 1.0, 5.0).holds);
}

TEST(Kernel, PavingEmptyTarget) {
  const auto k = heat_kernel(0.5, 16);
  const Paving p({}, 4);
  const auto r = paving_integral_check(k, p, {}, 1.0, 0.5);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_LE(r.rhs, 0.0);
  EXPECT_TRUE(r.holds);
}

TEST(Kernel, PavingLeftEndpointsExact) {
  // oracle: exact rational sums of p_64 evaluated independently
  const auto k = heat_kernel(0.5, 64);
  const Paving p(interval_sites(-16, 16), 4);
  std::vector<std::int64_t> pts;
  for (auto i : p.indices()) pts.push_back(p.segment_start(i));
  const auto r = paving_integral_check(k, p, pts, 0.25, 0.0);
  EXPECT_NEAR(r.lhs, 0.24972726810195578, 1e-15);
  EXPECT_NEAR(r.target_mass, 0.9966258149799078, 1e-15);
  EXPECT_NEAR(r.rhs, 0.25 * 0.9966258149799078, 1e-15);
  EXPECT_TRUE(r.holds);
  EXPECT_EQ(r.fitted_c, 0.0);
}

TEST(Kernel, PavingDensityViolation) {
  const auto k = heat_kernel(0.5, 16);
  const Paving p(interval_sites(0, 7), 4);
  try {
    paving_integral_check(k, p, {0, 1}, 0.25, 0.1);
    FAIL() << "expected a precondition error";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("segment 1"), std::string::npos) << e.what();
  }
}
