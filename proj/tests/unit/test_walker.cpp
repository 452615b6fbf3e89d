#include <gtest/gtest.h>

#include <cmath>

#include "rwdre/error.hpp"
#include "rwdre/kernel.hpp"
#include "rwdre/parallel.hpp"
#include "rwdre/stat_tests.hpp"
#include "rwdre/walker.hpp"

using namespace rwdre;
using namespace rwdre::walker;

namespace {

// Occupancy view with every site occupied or every site vacant.
struct Constant : env::Occupancy {
  bool full;
  explicit Constant(bool f) : full(f) {}
  int count(std::int64_t, std::int64_t) const override { return full ? 1 : 0; }
};

}  // namespace

TEST(Walker, DegenerateProbabilities) {
  const Constant vac(false), occ(true);
  const UniformField U(1);
  for (const env::Occupancy* o : {static_cast<const env::Occupancy*>(&vac), static_cast<const env::Occupancy*>(&occ)}) {
    const auto r = run_walk(*o, U, {1.0, 1.0}, {0, 0}, 200);
    const auto l = run_walk(*o, U, {0.0, 0.0}, {0, 0}, 200);
    for (std::int64_t i = 0; i <= 200; ++i) {
      EXPECT_EQ(r.x[i], i);
      EXPECT_EQ(l.x[i], -i);
    }
  }
}

TEST(Walker, ThresholdSemantics) {
  const Constant occ(true);
  const UniformField U(2);
  // find a site with U close to 0.3
  Point y{0, 0};
  for (std::int64_t x = 0;; ++x) {
    const double u = U(x, 0);
    if (u > 0.25 && u < 0.35) {
      y = {x, 0};
      break;
    }
  }
  const double u = U(y.x, y.n);
  EXPECT_EQ(step(occ, U, {0.0, 0.5}, y).x, y.x + 1);
  EXPECT_EQ(step(occ, U, {0.0, 0.2}, y).x, y.x - 1);
  // closed inequality
  EXPECT_EQ(step(occ, U, {0.0, u}, y).x, y.x + 1);
}

TEST(Walker, ZeroStepsAndDeterminism) {
  env::Environment e(walk_window(1.0, 0.5, 300, 10, 5));
  env::WalkCursor c1(e), c2(e);
  const UniformField U(9);
  const WalkParams w{0.3, 0.8};
  const auto p0 = run_walk(c1, U, w, {0, 0}, 0);
  ASSERT_EQ(p0.x.size(), 1u);
  EXPECT_EQ(p0.x[0], 0);
  const auto a = run_walk(c1, U, w, {0, 0}, 300);
  const auto b = run_walk(c2, U, w, {0, 0}, 300);
  const auto c = run_walk(e, U, w, {0, 0}, 300);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.x, c.x);
  for (std::int64_t i = 0; i < 300; ++i) ASSERT_EQ(std::abs(a.x[i + 1] - a.x[i]), 1);
}

TEST(Walker, LeavingExactRegionThrows) {
  auto cfg = walk_window(1.0, 0.5, 50, 0, 5);
  env::Environment e(cfg);
  env::WalkCursor c(e);
  EXPECT_THROW(run_walk(c, UniformField(1), {1.0, 1.0}, {0, 0}, 80), CertifiedRegionError);
  EXPECT_THROW(run_walk(e, UniformField(1), {1.0, 1.0}, {0, 0}, 80), CertifiedRegionError);
}

TEST(Walker, EmptyEnvironmentHoeffding) {
  env::Environment e(walk_window(0.0, 0.5, 5000, 0, 1));
  const auto p = run_walk(e, UniformField(3), {0.7, 0.2}, {0, 0}, 5000);
  EXPECT_LE(std::abs(p.x.back() / 5000.0 - 0.4), 0.1);
}

TEST(Walker, FullyOccupiedIsHomogeneousWalk) {
  // rho = 30 leaves a site vacant with probability e^{-30}; occupancy is checked on the path
  const int n = 40, reps = 3000;
  std::vector<double> hist(n + 1, 0.0);
  std::vector<int> ends(reps);
  parallel_for(reps, [&](std::size_t r) {
    env::Environment e(walk_window(30.0, 0.5, n, 0, 100 + r));
    env::WalkCursor c(e);
    const auto p = run_walk(c, UniformField(7000 + r), {0.1, 0.8}, {0, 0}, n);
    for (std::int64_t i = 0; i < n; ++i)
      if (!c.occupied(p.x[i], i)) throw std::runtime_error("vacant site on path");
    ends[r] = static_cast<int>((p.x.back() + n) / 2);
  });
  for (int b : ends) hist[b] += 1;
  std::vector<double> expd(n + 1);
  for (int k = 0; k <= n; ++k)
    expd[k] = reps * std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                              k * std::log(0.8) + (n - k) * std::log(0.2));
  EXPECT_GT(stat::chi2_gof(hist, expd).p_value, 0.01);
}

TEST(Walker, QuenchedAnnealedConsistency) {
  const int reps = 10000;
  std::vector<int> occ(reps), right(reps);
  parallel_for(reps, [&](std::size_t r) {
    env::EnvConfig c;
    c.rho = 0.7;
    c.x_min = -2;
    c.x_max = 2;
    c.t_max = 1;
    c.t_min = 0;
    c.seed = 500 + r;
    env::Environment e(c);
    occ[r] = e.occupied(0, 0);
    right[r] = goes_right(e, UniformField(90000 + r), {0.3, 0.8}, {0, 0});
  });
  double no = 0, ro = 0, nv = 0, rv = 0;
  for (int r = 0; r < reps; ++r) {
    if (occ[r]) {
      no += 1;
      ro += right[r];
    } else {
      nv += 1;
      rv += right[r];
    }
  }
  EXPECT_NEAR(ro / no, 0.8, 3 * std::sqrt(0.8 * 0.2 / no));
  EXPECT_NEAR(rv / nv, 0.3, 3 * std::sqrt(0.3 * 0.7 / nv));
}

TEST(Walker, CoupledInitialOrdering) {
  const WalkParams w{0.35, 0.75};
  for (int t = 0; t < 1000; ++t) {
    env::Environment e(walk_window(1.0, 0.5, 100, 4, 1000 + t));
    env::WalkCursor c(e);
    const UniformField U(50000 + t);
    auto [a, b] = coupled_pair_initial(c, U, w, {-1, 0}, {1, 0}, 100);
    for (std::size_t i = 0; i < a.x.size(); ++i) ASSERT_LE(a.x[i], b.x[i]);
  }
  env::Environment e(walk_window(1.0, 0.5, 50, 0, 1));
  auto [a, b] = coupled_pair_initial(e, UniformField(1), w, {0, 0}, {0, 0}, 50);
  EXPECT_EQ(a.x, b.x);
  EXPECT_THROW(coupled_pair_initial(e, UniformField(1), w, {0, 0}, {1, 0}, 10), PreconditionError);
  EXPECT_THROW(coupled_pair_initial(e, UniformField(1), w, {2, 0}, {0, 0}, 10), PreconditionError);
}

TEST(Walker, CoupledEnvironmentOrdering) {
  const WalkParams w{0.3, 0.8};
  int strictly = 0;
  for (int t = 0; t < 1000; ++t) {
    env::Environment e(walk_window(0.5, 0.5, 100, 0, 3000 + t));
    env::WalkCursor c(e);
    env::Trajectory pinned;
    pinned.t0 = 0;
    pinned.x.assign(101, 0);
    auto [a, b] = coupled_pair_environment(c, {pinned}, UniformField(70000 + t), w, {0, 0}, 100);
    for (std::size_t i = 0; i < a.x.size(); ++i) ASSERT_LE(a.x[i], b.x[i]);
    strictly += a.x.back() < b.x.back();
  }
  EXPECT_GT(strictly, 0);
  env::Environment e(walk_window(1.0, 0.5, 50, 0, 1));
  auto [a, b] = coupled_pair_environment(e, {}, UniformField(1), w, {0, 0}, 50);
  EXPECT_EQ(a.x, b.x);
  EXPECT_THROW(coupled_pair_environment(e, {}, UniformField(1), {0.8, 0.3}, {0, 0}, 10), PreconditionError);
}
