#include <gtest/gtest.h>

#include <cmath>

#include "rwdre/error.hpp"
#include "rwdre/regen.hpp"
#include "rwdre/stat_tests.hpp"

using namespace rwdre;
using namespace rwdre::regen;
using walker::Path;
using walker::Point;
using walker::UniformField;
using walker::WalkParams;

namespace {

Path straight(int steps, int dir) {
  Path p;
  for (int i = 0; i <= steps; ++i) p.x.push_back(dir * i);
  return p;
}

env::Environment make_env(double rho, double q, std::int64_t steps, std::uint64_t seed) {
  return env::Environment(regen_window(rho, q, steps, seed));
}

}  // namespace

TEST(Cones, Examples) {
  const double v = 1.0 / 3.0;
  EXPECT_TRUE(in_up_cone({5, 7}, {5, 7}, v));
  EXPECT_FALSE(in_down_cone({5, 7}, {5, 7}, v));
  EXPECT_TRUE(in_up_cone({0, 0}, {1, 3}, v));
  EXPECT_FALSE(in_down_cone({0, 0}, {-1, -3}, v));
  EXPECT_TRUE(in_down_cone({0, 0}, {-2, -3}, v));
  EXPECT_FALSE(in_up_cone({0, 0}, {3, -1}, v));
}

TEST(Cones, KappaMatchesScan) {
  const double v = 0.1;
  for (std::int64_t n = 0; n < 40; ++n)
    for (std::int64_t x = -10; x < 60; ++x) {
      if (x < v * n) continue;  // kappa is only used inside the base cone
      std::int64_t k = 0;
      while (x - v * n >= (1 - v) * (k + 1) - kConeEps) ++k;
      EXPECT_EQ(kappa({x, n}, v), k) << x << "," << n;
    }
}

TEST(Records, StraightPaths) {
  const auto r = record_times(straight(50, 1), 1.0 / 3.0);
  ASSERT_EQ(r.size(), 50u);
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(r[i].k, static_cast<std::int64_t>(i) + 1);
    EXPECT_EQ(r[i].R, static_cast<std::int64_t>(i) + 1);
  }
  EXPECT_TRUE(record_times(straight(50, -1), 1.0 / 3.0).empty());
}

TEST(Records, ConsecutiveIffRightStep) {
  const auto env = make_env(1.0, 0.5, 2000, 3);
  const env::WalkCursor cur(env);
  const WalkParams w{0.7, 0.9};
  const double v = 0.1;
  int pairs = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto path = walker::run_walk(cur, UniformField(s), w, {0, 0}, 1500);
    const auto r = record_times(path, v);
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
      ASSERT_GE(r[i + 1].R, r[i].R + 1);
      const bool right = path.x[r[i].R + 1] - path.x[r[i].R] == 1;
      EXPECT_EQ(right, r[i + 1].R == r[i].R + 1);
      ++pairs;
    }
  }
  EXPECT_GT(pairs, 1000);
}

TEST(Derived, ParametersForNonNestlingRun) {
  RegenConfig cfg;
  cfg.v_star = 0.3;
  cfg.T = 200;
  const auto d = derive(cfg, {0.7, 0.9});
  EXPECT_NEAR(d.v_bar, 0.1, 1e-15);
  EXPECT_NEAR(d.delta, 1.0 / (4.0 * std::log(1.0 / 0.7)), 1e-15);
  EXPECT_NEAR(d.delta, 0.701, 1e-3);
  EXPECT_NEAR(d.epsilon, 0.00876, 1e-5);
  EXPECT_EQ(d.T_prime, 1);
  EXPECT_EQ(d.T_dprime, 3);
  cfg.T = 4;
  EXPECT_THROW(derive(cfg, {0.7, 0.9}), ParameterError);
}

TEST(Bounds, ThetaSolvesItsEquations) {
  for (double q : {0.0, 0.3, 0.8})
    for (double v : {0.05, 0.1, 0.3}) {
      const double th = crossing_theta(q, v);
      ASSERT_TRUE(std::isfinite(th) && th > 0);
      EXPECT_NEAR(std::log(q + (1 - q) * std::cosh(th)), th * v, 1e-9);
    }
  EXPECT_TRUE(std::isinf(crossing_theta(1.0, 0.1)));
  const double p = 0.7, v = 0.1, th = confinement_theta(p, v);
  EXPECT_NEAR(p * std::exp(-th * (1 - v)) + (1 - p) * std::exp(th * (1 + v)), 1.0, 1e-9);
  EXPECT_EQ(confinement_theta(0.54, 0.1), 0.0);
  EXPECT_EQ(confinement_bound(1.0, 0.1, 0.0), 0.0);
}

TEST(Bounds, CrossingBoundDominatesSimulation) {
  // P(sup_m S_m - v m >= d) for a lazy walk, against the residual bound
  const double q = 0.5, v = 0.1;
  const int reps = 20000, d = 6;
  Stream s(77);
  int hits = 0;
  for (int r = 0; r < reps; ++r) {
    double g = 0;
    for (int m = 0; m < 3000 && g < d; ++m) {
      const double u = to_unit(s.next());
      g += (u < (1 - q) / 2 ? 1 : (u < 1 - q ? -1 : 0)) - v;
    }
    hits += g >= d;
  }
  const double est = static_cast<double>(hits) / reps;
  EXPECT_LE(est - 3 * std::sqrt(est * (1 - est) / reps), crossing_bound(q, v, d));
}

TEST(Influence, EmptyEnvironment) {
  const auto env = make_env(0.0, 0.5, 200, 1);
  const auto h = influence_field(env, {0, 0}, 0.1, 1e-3);
  EXPECT_EQ(h.value, 0);
  EXPECT_TRUE(h.certified);
  RegenConfig cfg;
  const auto d = derive(cfg, {0.7, 0.9});
  EXPECT_EQ(local_influence_field(env, {0, 0}, d, 1e-3).value, 0);
}

TEST(Influence, FrozenParticlesNeverLinkCones) {
  // with q = 1 every trajectory is a vertical line; one left of y sits in the down-cone
  // only, one right of y in the up-cone only
  const auto env = make_env(3.0, 1.0, 200, 5);
  for (std::int64_t x : {-7, 0, 4}) {
    const auto h = influence_field(env, {x, 10}, 0.1, 1e-3);
    EXPECT_EQ(h.value, 0);
    EXPECT_TRUE(h.certified);
    EXPECT_EQ(h.residual, 0.0);
  }
}

namespace {

// direct membership in W^x_y from a stored trajectory over [t_min, t_max]
bool links_cones(const std::vector<std::int64_t>& tr, std::int64_t t_min, Point y, double v) {
  bool up = false, down = false;
  for (std::size_t j = 0; j < tr.size(); ++j) {
    const Point z{tr[j], t_min + static_cast<std::int64_t>(j)};
    up = up || in_up_cone(y, z, v);
    down = down || in_down_cone(y, z, v);
  }
  return up && down;
}

// window small enough for stored trajectories, wide enough for tiny residuals
env::Environment small_env(std::uint64_t seed) {
  env::EnvConfig c;
  c.rho = 1.0;
  c.q = 0.5;
  c.x_min = -900;
  c.x_max = 900;
  c.t_min = -1500;
  c.t_max = 1500;
  c.seed = seed;
  return env::Environment(c);
}

}  // namespace

TEST(Influence, MatchesFullTrajectoryScan) {
  const auto env = small_env(17);
  const env::WalkCursor probe(env);
  const double v = 0.1;
  std::vector<std::vector<std::int64_t>> trs;
  for (const auto& p : env.particles()) trs.push_back(env.trajectory(p));
  int nonempty = 0, positive = 0;
  for (std::int64_t n = 0; n <= 40; n += 8)
    for (std::int64_t x = -30; x <= 30; x += 6) {
      const Point y{x, n};
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < trs.size(); ++i)
        if (links_cones(trs[i], env.t_min(), y, v)) members.push_back(i);
      std::int64_t h = 0;
      for (;; ++h) {
        bool any = false;
        for (std::size_t i : members) any = any || links_cones(trs[i], env.t_min(), {x + h, n + h}, v);
        if (!any) break;
      }
      const auto cross = cross_empty(env, probe, y, v, 1e-3);
      const auto inf = influence_field(env, probe, y, v, 1e-3);
      ASSERT_TRUE(inf.certified);
      EXPECT_EQ(cross.empty, members.empty()) << x << "," << n;
      EXPECT_EQ(inf.members, static_cast<int>(members.size())) << x << "," << n;
      EXPECT_EQ(inf.value, h) << x << "," << n;
      nonempty += !members.empty();
      positive += h > 0;
    }
  EXPECT_GT(nonempty, 5);
  EXPECT_GT(positive, 5);
}

TEST(Influence, LocalNeverExceedsGlobal) {
  const auto env = make_env(1.0, 0.5, 400, 11);
  const env::WalkCursor probe(env);
  RegenConfig cfg;
  cfg.T = 1e6;  // T' > 1 so the filter is not trivial
  const auto d = derive(cfg, {0.7, 0.9});
  int positive = 0;
  for (std::int64_t n = 0; n < 200; n += 10)
    for (std::int64_t x = -20; x <= 20; x += 5) {
      const auto h = influence_field(env, probe, {x, n}, d.v_bar, 1e-3);
      const auto hT = local_influence_field(env, probe, {x, n}, d, 1e-3);
      EXPECT_LE(hT.value, h.value);
      positive += h.value > 0;
    }
  EXPECT_GT(positive, 0);
}

TEST(GoodRecords, DiagonalConditionFrequency) {
  // p_circ ^ p_bullet = 0.5 and T = 1000 give T'' = 2
  RegenConfig cfg;
  cfg.T = 1000;
  const WalkParams w{0.9, 0.5};
  const auto d = derive(cfg, w);
  ASSERT_EQ(d.T_dprime, 2);
  const auto env = make_env(0.0, 0.5, 100, 1);
  const env::WalkCursor cur(env);
  const int reps = 10000;
  int hold = 0, checked = 0;
  for (int r = 0; r < reps; ++r) {
    const UniformField U(hash_keys(9, {static_cast<std::uint64_t>(r)}));
    const auto path = walker::run_walk(cur, U, w, {0, 0}, 60);
    const auto recs = record_times(path, d.v_bar);
    ASSERT_FALSE(recs.empty());
    const auto g = good_record_flags(env, U, w, path, d, 1e-3);
    ASSERT_EQ(g.size(), recs.size());
    EXPECT_EQ(g[0].c3, Tri::True);
    hold += g[0].c2 == Tri::True;
    for (std::size_t i = 0; i + 2 < recs.size(); ++i)
      if (g[i].c2 == Tri::True) {
        const Point y = path.at(recs[i].R);
        EXPECT_EQ(path.at(recs[i + 2].R), (Point{y.x + 2, y.n + 2}));
        ++checked;
      }
  }
  const double p = static_cast<double>(hold) / reps;
  EXPECT_NEAR(p, 0.25, 3 * std::sqrt(0.25 * 0.75 / reps));
  EXPECT_GT(checked, 1000);
}

TEST(GoodRecords, MatchFullTrajectoryScan) {
  const auto env = small_env(23);
  const env::WalkCursor cur(env);
  RegenConfig cfg;
  cfg.T = 1e6;
  cfg.c2_hat = 1.0;  // T' > T'' so the local filter and condition 4 are exercised
  const WalkParams w{0.7, 0.9};
  const auto d = derive(cfg, w);
  ASSERT_EQ(d.T_prime, 11);
  ASSERT_EQ(d.T_dprime, 9);
  const double v = d.v_bar;
  const auto a = static_cast<std::int64_t>(std::floor((1 - v) * d.T_prime));
  std::vector<std::vector<std::int64_t>> trs;
  for (const auto& p : env.particles()) trs.push_back(env.trajectory(p));
  auto touches = [&](const std::vector<std::int64_t>& tr, Point y, bool up) {
    for (std::size_t j = 0; j < tr.size(); ++j) {
      const Point z{tr[j], env.t_min() + static_cast<std::int64_t>(j)};
      if (up ? in_up_cone(y, z, v) : in_down_cone(y, z, v)) return true;
    }
    return false;
  };
  int c1_false = 0, c3_false = 0, c4_false = 0, checked = 0;
  for (std::uint64_t s = 0; s < 6; ++s) {
    const UniformField U(s);
    const auto path = walker::run_walk(cur, U, w, {0, 0}, 250);
    const auto recs = record_times(path, v);
    const auto g = good_record_flags(env, U, w, path, d, 1e-3);
    for (std::size_t i = 0; i < recs.size(); i += 3) {
      const Point y = path.at(recs[i].R);
      const Point ya{y.x - a, y.n};
      const Point y3{y.x + d.T_dprime, y.n + d.T_dprime};
      std::vector<std::size_t> local;
      bool c3_member = false;
      for (std::size_t j = 0; j < trs.size(); ++j) {
        // far trajectories are covered by the outside residual of the scan under test
        if (std::abs(trs[j][static_cast<std::size_t>(y.n - env.t_min())] - y.x) > 80) continue;
        const bool linked = links_cones(trs[j], env.t_min(), y, v);
        if (linked && touches(trs[j], ya, true) && !touches(trs[j], ya, false)) local.push_back(j);
        if (touches(trs[j], y, true) && !touches(trs[j], y, false) && links_cones(trs[j], env.t_min(), y3, v))
          c3_member = true;
      }
      std::int64_t hT = 0;
      for (;; ++hT) {
        bool any = false;
        for (std::size_t j : local) any = any || links_cones(trs[j], env.t_min(), {y.x + hT, y.n + hT}, v);
        if (!any) break;
      }
      EXPECT_EQ(g[i].c1, hT <= d.T_dprime ? Tri::True : Tri::False);
      EXPECT_EQ(g[i].c3, c3_member ? Tri::False : Tri::True);
      if (i + d.T_prime < recs.size()) {
        bool in = true;
        const Point base = path.at(recs[i + d.T_dprime].R);
        for (auto j = recs[i + d.T_dprime].R + 1; j <= recs[i + d.T_prime].R; ++j)
          in = in && in_up_cone(base, path.at(j), v);
        EXPECT_EQ(g[i].c4, in ? Tri::True : Tri::False);
        c4_false += !in;
      } else {
        EXPECT_EQ(g[i].c4, Tri::Undetermined);
      }
      c1_false += hT > d.T_dprime;
      c3_false += c3_member;
      ++checked;
    }
  }
  EXPECT_GT(checked, 50);
  EXPECT_GT(c3_false, 0);
  EXPECT_GT(c1_false, 0);
  EXPECT_GT(c4_false, 0);
}

TEST(Regeneration, DeterministicPath) {
  const auto env = make_env(0.0, 0.5, 200, 1);
  const auto rep = regeneration_time(env, UniformField(1), {1.0, 1.0}, RegenConfig{}, {0, 0}, 100);
  ASSERT_TRUE(rep.found);
  EXPECT_TRUE(rep.certified);
  EXPECT_EQ(rep.index, 1);
  EXPECT_EQ(rep.tau, 1);
  EXPECT_EQ(rep.x_tau, 1);
  EXPECT_LE(rep.residual, 1e-3);
}

TEST(Regeneration, ZeroHorizon) {
  const auto env = make_env(1.0, 0.5, 200, 1);
  const auto rep = regeneration_time(env, UniformField(1), {0.7, 0.9}, RegenConfig{}, {0, 0}, 0);
  EXPECT_FALSE(rep.found);
  EXPECT_TRUE(rep.records.empty());
}

TEST(Regeneration, HomogeneousWalkFindsTau) {
  const auto env = make_env(0.0, 0.5, 10000, 1);
  int found = 0;
  const int reps = 1000;
  for (int s = 0; s < reps; ++s) {
    const auto rep = regeneration_time(env, UniformField(s), {0.9, 0.9}, RegenConfig{}, {0, 0}, 10000);
    found += rep.found && rep.certified;
  }
  EXPECT_GE(found, 990);
}

TEST(Regeneration, CertifiedResidualWithinBudget) {
  const auto env = make_env(1.0, 0.5, 20000, 21);
  RegenConfig cfg;
  cfg.details = true;
  for (int s = 0; s < 5; ++s) {
    const auto rep = regeneration_time(env, UniformField(s), {0.7, 0.9}, cfg, {0, 0}, 20000);
    ASSERT_TRUE(rep.found);
    if (!rep.certified) continue;
    EXPECT_LE(rep.residual, cfg.cert_tol);
    EXPECT_EQ(rep.records.back().R, rep.tau);
    EXPECT_EQ(rep.records.back().k, rep.index);
    for (const auto& r : rep.records) {
      ASSERT_TRUE(r.h && r.hT && r.good);
      EXPECT_LE(r.hT->value, r.h->value);
    }
    EXPECT_EQ(rep.path.x[rep.tau], rep.x_tau);
  }
}

TEST(Regeneration, SequenceIsConsistent) {
  const auto env = make_env(1.0, 0.5, 30000, 8);
  const auto seq = regen_sequence(env, UniformField(4), {0.7, 0.9}, RegenConfig{}, {0, 0}, 5000, 5);
  ASSERT_EQ(seq.segments.size(), 5u);
  std::int64_t t = 0, x = 0;
  for (const auto& s : seq.segments) {
    EXPECT_GE(s.dt, 1);
    t += s.dt;
    x += s.dx;
    EXPECT_EQ(s.tau, t);
    EXPECT_EQ(s.x, x);
  }
}

TEST(Regeneration, Estimators) {
  const std::vector<double> dx{3, 5, 2, 6}, dt{4, 6, 3, 7};
  EXPECT_NEAR(speed_from_increments(dx, dt).value, 16.0 / 20.0, 1e-12);
  const double v = 0.8;
  double num = 0;
  for (int i = 0; i < 4; ++i) num += (dx[i] - v * dt[i]) * (dx[i] - v * dt[i]);
  EXPECT_NEAR(sigma2_from_increments(dx, dt), num / 20.0, 1e-12);
}

TEST(Parallelogram, RightBoundaryHasOnePointPerRow) {
  // rows n_y .. n_y + floor(t / v) are all nonempty, so the count is floor(t / v) + 1;
  // the t / v bound is off by one when t / v is an integer
  for (double v : {0.1, 0.3, 1.0 / 7.0})
    for (std::int64_t t : {4, 7, 10, 15})
      for (Point y : {Point{0, 0}, Point{3, 5}, Point{12, 20}}) {
        const auto b = right_boundary(y, t, v);
        const auto rows = static_cast<std::int64_t>(std::floor(t / v + 1e-9)) + 1;
        ASSERT_EQ(static_cast<std::int64_t>(b.size()), rows);
        for (std::int64_t i = 0; i < rows; ++i) EXPECT_EQ(b[i].n, y.n + i);
        EXPECT_LE(static_cast<double>(b.size()), t / v + 1.0);
      }
}

TEST(Parallelogram, ExitProbe) {
  const auto sure = parallelogram_exit_probe(0.0, 0.5, {1.0, 1.0}, {0, 0}, 10, 0.3, 50, 1);
  EXPECT_EQ(sure.estimate, 1.0);
  const auto p = parallelogram_exit_probe(0.0, 0.5, {0.9, 0.9}, {0, 0}, 10, 0.3, 400, 2);
  EXPECT_GT(p.estimate, 0.0);
  EXPECT_LT(p.estimate, 1.0);
  EXPECT_TRUE(p.positive);
}
