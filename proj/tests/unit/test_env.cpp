#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "rwdre/env.hpp"
#include "rwdre/error.hpp"
#include "rwdre/rng.hpp"
#include "rwdre/stat_tests.hpp"

using namespace rwdre;
using namespace rwdre::env;

namespace {

EnvConfig cfg(double rho, double q, std::int64_t xmin, std::int64_t xmax, std::int64_t tmax, std::uint64_t seed) {
  EnvConfig c;
  c.rho = rho;
  c.q = q;
  c.x_min = xmin;
  c.x_max = xmax;
  c.t_max = tmax;
  c.seed = seed;
  return c;
}

stat::TestResult poisson_gof(const std::vector<std::uint32_t>& counts, double rho) {
  std::map<std::uint32_t, double> hist;
  std::uint32_t kmax = 0;
  for (auto c : counts) {
    hist[c] += 1;
    kmax = std::max(kmax, c);
  }
  std::vector<double> obs, expd;
  double tail = 1.0;
  for (std::uint32_t k = 0; k <= kmax; ++k) {
    obs.push_back(hist.count(k) ? hist[k] : 0.0);
    const double p = stat::poisson_pmf(k, rho);
    expd.push_back(p * counts.size());
    tail -= p;
  }
  obs.push_back(0.0);
  expd.push_back(std::max(tail, 0.0) * counts.size());
  return stat::chi2_gof(obs, expd);
}

}  // namespace

TEST(EnvBlocks, SumAndExtremesMatchNaive) {
  Stream s(5);
  for (int t = 0; t < 2000; ++t) {
    BlockWords w{s.next(), s.next()};
    int sum = 0, lo = 0, hi = 0;
    for (int j = 0; j < kBlock; ++j) {
      if ((w.move >> j) & 1) sum += ((w.dir >> j) & 1) ? 1 : -1;
      lo = std::min(lo, sum);
      hi = std::max(hi, sum);
      ASSERT_EQ(block_sum(w, j + 1), sum);
    }
    const auto e = block_extremes(w);
    ASSERT_EQ(e.sum, sum);
    ASSERT_EQ(e.min_prefix, lo);
    ASSERT_EQ(e.max_prefix, hi);
  }
}

TEST(EnvBlocks, FloorDiv) {
  EXPECT_EQ(floor_div(-1, 64), -1);
  EXPECT_EQ(floor_div(-64, 64), -1);
  EXPECT_EQ(floor_div(-65, 64), -2);
  EXPECT_EQ(floor_div(63, 64), 0);
}

TEST(Env, ConfigValidation) {
  EXPECT_THROW(Environment(cfg(-1, 0.5, 0, 10, 10, 1)), ParameterError);
  EXPECT_THROW(Environment(cfg(1, 1.2, 0, 10, 10, 1)), ParameterError);
  EXPECT_THROW(Environment(cfg(1, 0.5, 10, 0, 10, 1)), ParameterError);
  auto c = cfg(1, 0.5, 0, 10, 10, 1);
  c.t_min = 3;
  EXPECT_THROW(Environment{c}, ParameterError);
  auto big = cfg(100, 0.5, 0, 10'000'000, 10, 1);
  EXPECT_THROW(Environment{big}, ResourceError);
  EXPECT_EQ(Environment(cfg(1, 0.5, 0, 10, 100, 1)).t_min(), -25);
}

TEST(Env, EmptyEnvironment) {
  Environment e(cfg(0.0, 0.5, -20, 20, 20, 3));
  EXPECT_TRUE(e.particles().empty());
  for (int n = e.t_min(); n <= e.t_max(); ++n)
    for (int x = -20; x <= 20; ++x) ASSERT_FALSE(e.occupied(x, n));
}

TEST(Env, OutOfWindowIsRangeError) {
  Environment e(cfg(1.0, 0.5, -20, 20, 20, 3));
  EXPECT_THROW(e.count(21, 0), RangeError);
  EXPECT_THROW(e.count(0, 21), RangeError);
  EXPECT_THROW(e.count(0, -6), RangeError);
  EXPECT_THROW(e.brute_count(-21, 0), RangeError);
}

TEST(Env, PoissonMeanAndMarginals) {
  Environment e(cfg(2.0, 0.5, 0, 9999, 0, 17));
  std::vector<std::uint32_t> c;
  double sum = 0;
  for (std::int64_t z = 0; z < 10000; ++z) {
    c.push_back(e.initial_count(z));
    sum += c.back();
  }
  EXPECT_NEAR(sum / 1e4, 2.0, 3 * std::sqrt(2.0 / 1e4));
  EXPECT_GT(poisson_gof(c, 2.0).p_value, 0.01);
}

TEST(Env, StationarityInsideExactRegion) {
  Environment e(cfg(1.5, 0.3, -5200, 5200, 200, 23));
  for (std::int64_t n : {-50, 37, 200}) {
    std::vector<std::uint32_t> c;
    for (std::int64_t x = -5000; x < 5000; ++x) c.push_back(static_cast<std::uint32_t>(e.count(x, n)));
    EXPECT_GT(poisson_gof(c, 1.5).p_value, 0.01) << "n=" << n;
  }
}

TEST(Env, SpeedLimitAndConservation) {
  Environment e(cfg(1.0, 0.4, -60, 60, 150, 29));
  const auto& ps = e.particles();
  ASSERT_FALSE(ps.empty());
  std::map<std::int64_t, long> inside;
  for (const auto& p : ps) {
    const auto tr = e.trajectory(p);
    ASSERT_EQ(tr.size(), static_cast<std::size_t>(e.t_max() - e.t_min() + 1));
    ASSERT_EQ(tr[static_cast<std::size_t>(-e.t_min())], p.z);
    for (std::size_t k = 1; k < tr.size(); ++k) ASSERT_LE(std::abs(tr[k] - tr[k - 1]), 1);
    for (std::size_t k = 0; k < tr.size(); ++k) {
      ASSERT_EQ(tr[k], e.position(p, e.t_min() + static_cast<std::int64_t>(k)));
      inside[e.t_min() + static_cast<std::int64_t>(k)] += tr[k] >= -60 && tr[k] <= 60;
    }
  }
  for (std::int64_t n = e.t_min(); n <= e.t_max(); n += 7) {
    long s = 0;
    for (std::int64_t x = -60; x <= 60; ++x) s += e.count(x, n);
    EXPECT_EQ(s, inside[n]);
  }
}

TEST(Env, IndexedCountMatchesBruteForce) {
  Environment e(cfg(2.0, 0.5, -80, 80, 90, 31));
  Stream s(1);
  for (int k = 0; k < 300; ++k) {
    const std::int64_t x = -80 + static_cast<std::int64_t>(s.uniform() * 161);
    const std::int64_t n = e.t_min() + static_cast<std::int64_t>(s.uniform() * (e.t_max() - e.t_min() + 1));
    ASSERT_EQ(e.count(x, n), e.brute_count(x, n)) << x << "," << n;
  }
}

TEST(Env, PureHoldingKeepsInitialCounts) {
  Environment e(cfg(1.0, 1.0, -30, 30, 40, 37));
  for (std::int64_t n : {-10, 0, 40})
    for (std::int64_t x = -30; x <= 30; ++x) ASSERT_EQ(e.count(x, n), static_cast<int>(e.initial_count(x)));
}

TEST(Env, SingleStationaryParticle) {
  Environment empty(cfg(0.0, 1.0, -10, 10, 10, 1));
  Trajectory t;
  t.t0 = -2;
  t.x.assign(13, 0);
  AugmentedOccupancy a(empty, {t});
  for (std::int64_t n = -2; n <= 10; ++n) {
    EXPECT_EQ(a.count(0, n), 1);
    EXPECT_EQ(a.count(1, n), 0);
  }
  EXPECT_THROW(t.at(11), RangeError);
}

TEST(Env, TruncationSoundness) {
  auto small = cfg(1.0, 0.5, -100, 100, 80, 41);
  small.t_min = -30;
  auto large = small;
  large.x_min = -400;
  large.x_max = 250;
  large.t_max = 120;
  Environment a(small), b(large);
  for (std::int64_t n = -30; n <= 80; n += 5)
    for (std::int64_t x = -100 + std::abs(n); x <= 100 - std::abs(n); ++x)
      ASSERT_EQ(a.count(x, n), b.count(x, n)) << x << "," << n;
}

TEST(Env, CursorMatchesBruteForceAlongWalk) {
  auto c = cfg(3.0, 0.5, -700, 700, 600, 43);
  c.t_min = -200;
  Environment e(c);
  WalkCursor cur(e);
  Stream s(2);
  std::int64_t x = 0;
  for (std::int64_t n = 0; n <= 400; ++n) {
    ASSERT_EQ(cur.count(x, n), e.count(x, n)) << x << "," << n;
    ASSERT_EQ(cur.count(x + 3, n), e.count(x + 3, n));
    x += s.uniform() < 0.6 ? 1 : -1;
  }
  // backward in time and random jumps
  for (int k = 0; k < 400; ++k) {
    const std::int64_t n = -200 + static_cast<std::int64_t>(s.uniform() * 500);
    const std::int64_t lim = 700 - std::abs(n);
    const std::int64_t y = -lim + static_cast<std::int64_t>(s.uniform() * (2 * lim + 1));
    ASSERT_EQ(cur.count(y, n), e.count(y, n)) << y << "," << n;
  }
  EXPECT_THROW(cur.count(0, 601), CertifiedRegionError);
  EXPECT_THROW(cur.count(650, 100), CertifiedRegionError);
}

TEST(Env, CursorNearListsExactPositions) {
  Environment e(cfg(2.0, 0.5, -300, 300, 200, 47));
  WalkCursor cur(e);
  for (std::int64_t n : {5, 70, 130, -20}) {
    const auto v = cur.near(10, n, 4);
    int total = 0;
    for (std::int64_t x = 6; x <= 14; ++x) total += e.count(x, n);
    EXPECT_EQ(static_cast<int>(v.size()), total);
    for (const auto& p : v) EXPECT_EQ(p.position, e.position(p.id, n));
  }
}

TEST(Env, GridMatchesBruteForce) {
  Environment e(cfg(2.0, 0.6, -200, 200, 150, 53));
  OccupancyGrid g(e, -40, 40, -30, 120);
  for (std::int64_t n = -30; n <= 120; n += 3)
    for (std::int64_t x = -40; x <= 40; ++x) ASSERT_EQ(g.count(x, n), e.count(x, n));
  EXPECT_THROW(OccupancyGrid(e, -190, 0, 0, 20), CertifiedRegionError);
  EXPECT_THROW(g.count(41, 0), RangeError);
}

TEST(Env, CovarianceTheory) {
  EXPECT_NEAR(covariance_theory(1.0, 0.5, 2), 0.06157639196758136, 1e-14);
  EXPECT_EQ(covariance_theory(0.0, 0.5, 5), 0.0);
  EXPECT_THROW(covariance_theory(1.0, 0.5, 0), ParameterError);
}

TEST(Env, BoundaryDeterminism) {
  const Box B{-10, 10, 5, 30};
  auto c1 = cfg(1.0, 0.5, -300, 300, 100, 59);
  Environment e1(c1), same(c1);
  EXPECT_TRUE(boundary_determinism_check(e1, same, B));

  // re-randomize the past everywhere and everything outside the separating segment
  auto c2 = c1;
  c2.past_seed = 999;
  c2.splice = Splice{B.a - B.n1, B.b + B.n1, 12345};
  Environment e2(c2);
  EXPECT_TRUE(boundary_determinism_check(e1, e2, B));

  // shrinking the shared segment makes counts on H differ
  auto c3 = c1;
  c3.splice = Splice{B.a - B.n1 + 5, B.b + B.n1, 777};
  Environment e3(c3);
  bool differs = false;
  for (std::int64_t z = B.a - B.n1; z < B.a - B.n1 + 5; ++z) differs |= e1.initial_count(z) != e3.initial_count(z);
  ASSERT_TRUE(differs);
  EXPECT_THROW(boundary_determinism_check(e1, e3, B), PreconditionError);
}
