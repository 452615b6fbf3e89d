#include <gtest/gtest.h>

#include <cmath>

#include "rwdre/error.hpp"
#include "rwdre/stats.hpp"

using namespace rwdre;
using namespace rwdre::stats;

namespace {

EnsembleConfig homogeneous(double p, std::int64_t n, std::size_t replicas, std::uint64_t seed) {
  EnsembleConfig c;
  c.w = {p, p};
  c.n = n;
  c.replicas = replicas;
  c.seed = seed;
  return c;
}

// P(exists m <= H: S_m - m v < -L) for the +-1 walk with P(+1) = p, by dynamic
// programming over surviving positions.
double hit_probability(double p, double v, double L, int H) {
  std::vector<double> cur(2 * H + 1, 0.0), nxt(2 * H + 1);
  cur[H] = 1.0;
  double hit = 0.0;
  for (int m = 1; m <= H; ++m) {
    std::fill(nxt.begin(), nxt.end(), 0.0);
    for (int i = 0; i < 2 * H + 1; ++i) {
      if (cur[i] == 0.0) continue;
      if (i + 1 <= 2 * H) nxt[i + 1] += p * cur[i];
      if (i - 1 >= 0) nxt[i - 1] += (1 - p) * cur[i];
    }
    for (int i = 0; i < 2 * H + 1; ++i)
      if (nxt[i] != 0.0 && (i - H) - m * v < -L) {
        hit += nxt[i];
        nxt[i] = 0.0;
      }
    cur.swap(nxt);
  }
  return hit;
}

}  // namespace

TEST(Speed, HomogeneousWalkMatchesBinomial) {
  const auto cfg = homogeneous(0.7, 1000, 400, 3);
  const auto s = estimate_speed(cfg);
  EXPECT_LT(std::fabs(s.v_hat - 0.4), 3.0 * s.se);
  EXPECT_LE(s.ci_lo, s.v_hat);
  EXPECT_GE(s.ci_hi, s.v_hat);
  const auto s2 = ensemble_sigma2(s.X, cfg.n);
  EXPECT_LT(std::fabs(s2.value - 0.84), 3.0 * s2.se) << s2.value << " +- " << s2.se;
  EXPECT_TRUE(speed_sandwich(s, cfg.w));
}

TEST(Speed, DeterministicAndCiShrinks) {
  const auto a = estimate_speed(homogeneous(0.6, 200, 500, 4));
  const auto b = estimate_speed(homogeneous(0.6, 200, 500, 4));
  EXPECT_EQ(a.X, b.X);
  const auto big = estimate_speed(homogeneous(0.6, 200, 2000, 5));
  const double ratio = (big.ci_hi - big.ci_lo) / (a.ci_hi - a.ci_lo);
  EXPECT_NEAR(ratio, 0.5, 0.1);
}

TEST(Speed, InhomogeneousSandwich) {
  EnsembleConfig cfg;
  cfg.w = {0.3, 0.8};
  cfg.n = 500;
  cfg.replicas = 64;
  cfg.seed = 6;
  const auto s = estimate_speed(cfg);
  EXPECT_TRUE(speed_sandwich(s, cfg.w)) << s.v_hat;
  EXPECT_GT(s.v_hat, -0.4);
  EXPECT_LT(s.v_hat, 0.6);
}

TEST(Speed, ResourceGuard) {
  EnsembleConfig cfg;
  cfg.w = {0.3, 0.8};
  cfg.n = 5000;
  cfg.replicas = 400;
  cfg.rho = 50.0;
  cfg.max_work = 1e9;
  EXPECT_GT(estimated_work(cfg), cfg.max_work);
  EXPECT_THROW(estimate_speed(cfg), ResourceError);
}

TEST(Sigma, BatchMeansAgreeWithEnsemble) {
  const auto cfg = homogeneous(0.6, 2000, 300, 7);
  std::vector<std::int64_t> times(cfg.n + 1);
  for (std::int64_t t = 0; t <= cfg.n; ++t) times[t] = t;
  const auto paths = sample_positions(cfg, times);
  std::vector<double> X;
  for (const auto& p : paths) X.push_back(static_cast<double>(p.back()));
  const auto e = ensemble_sigma2(X, cfg.n);
  const auto b = batch_means_sigma2(paths, 20);
  EXPECT_LT(std::fabs(e.value - 0.96), 3.0 * e.se);
  EXPECT_LT(std::fabs(b.value - 0.96), 3.0 * b.se);
  EXPECT_LT(joint_z(e, b), 3.0);
}

TEST(Clt, SimpleRandomWalk) {
  const auto rep = clt_test(homogeneous(0.5, 4096, 1000, 8), 0.0, 1.0);
  EXPECT_GT(rep.terminal.p_value, 0.01);
  ASSERT_EQ(rep.marginals.size(), 3u);
  for (const auto& m : rep.marginals) EXPECT_GT(m.p_value, 0.01);
  ASSERT_EQ(rep.pairwise.size(), 3u);
  for (const auto& m : rep.pairwise) EXPECT_GT(m.p_value, 0.01);
  EXPECT_EQ(rep.var_times.front(), 256);
  EXPECT_EQ(rep.var_times.back(), 4096);
  EXPECT_NEAR(rep.var_slope.slope, 1.0, 0.1);
  EXPECT_THROW(clt_test(homogeneous(0.5, 16, 10, 8), 0.0, 0.0), ParameterError);
}

TEST(Ballisticity, HomogeneousMatchesDynamicProgram) {
  const auto rep = ballisticity_probe(homogeneous(0.7, 400, 4000, 9), 0.3, {2, 5, 10});
  for (const auto& row : rep.rows) {
    const double p = hit_probability(0.7, 0.3, row.L, 400);
    EXPECT_LT(std::fabs(row.p_hat - p), 3.0 * std::sqrt(p * (1 - p) / 4000.0) + 1e-12) << row.L << " " << p;
  }
}

TEST(Ballisticity, NonNestlingDecays) {
  EnsembleConfig cfg;
  cfg.w = {0.7, 0.9};
  cfg.n = 2000;
  cfg.replicas = 300;
  cfg.seed = 10;
  const auto rep = ballisticity_probe(cfg, 0.3, {5, 10, 20, 40});
  EXPECT_TRUE(rep.monotone);
  for (std::size_t i = 1; i < rep.rows.size(); ++i) EXPECT_LE(rep.rows[i].hits, rep.rows[i - 1].hits);
  EXPECT_LT(rep.slope_L.slope, 0.0);
  if (rep.slope_L_nonzero) EXPECT_LT(rep.slope_L_nonzero->slope, 0.0);
  EXPECT_THROW(ballisticity_probe(cfg, 1.5, {5}), PreconditionError);
  EXPECT_THROW(ballisticity_probe(cfg, 0.0, {5}), PreconditionError);
}

TEST(Covariance, MatchesTheory) {
  const auto row = covariance_empirical(1.0, 0.5, 2, 20000, 11);
  EXPECT_NEAR(row.theory, 0.06157639196758136, 1e-14);
  EXPECT_LT(std::fabs(row.cov - row.theory), 3.0 * row.se) << row.cov << " +- " << row.se;
  const auto zero = covariance_empirical(0.0, 0.5, 4, 100, 11);
  EXPECT_EQ(zero.cov, 0.0);
  EXPECT_EQ(zero.se, 0.0);
}

TEST(Covariance, PlateauRatio) {
  CovarianceRow a, b;
  a.sqrt_n_cov = 0.08;
  a.sqrt_n_cov_se = 0.008;
  b.sqrt_n_cov = 0.04;
  b.sqrt_n_cov_se = 0.002;
  const auto r = plateau_ratio(a, b);
  EXPECT_DOUBLE_EQ(r.value, 0.5);
  EXPECT_NEAR(r.se, 0.5 * std::hypot(0.1, 0.05), 1e-15);
}

TEST(Decoupling, TrivialSecondEvent) {
  DecouplingConfig cfg;
  cfg.replicas = 500;
  const auto rep = decoupling_probe(cfg, vacancy_event(-1, 1, 0), always_event(16));
  EXPECT_EQ(rep.gap, 0.0);
  EXPECT_TRUE(rep.sprinkled_holds);
  EXPECT_DOUBLE_EQ(rep.rho_sprinkled, 1.0 + std::pow(16.0, -1.0 / 16.0));
}

TEST(Decoupling, VacancyPairs) {
  DecouplingConfig cfg;
  cfg.replicas = 20000;
  cfg.seed = 12;
  const auto rep = decoupling_probe(cfg, vacancy_event(0, 0, 0), vacancy_event(0, 0, 16));
  EXPECT_TRUE(rep.fkg_holds);
  EXPECT_TRUE(rep.sprinkled_holds) << rep.gap << " +- " << rep.gap_se;
  // vacancy indicators have the same covariance as occupancy indicators
  const double theory = env::covariance_theory(1.0, 0.5, 16);
  EXPECT_LT(std::fabs(rep.cov - theory), 3.0 * rep.cov_se) << rep.cov << " vs " << theory;
  EXPECT_GT(rep.cov, 3.0 * rep.cov_se);
}

TEST(Decoupling, RejectsIncreasingEvents) {
  DecouplingConfig cfg;
  cfg.replicas = 10;
  EXPECT_THROW(decoupling_probe(cfg, occupancy_event(-2, 2, 0), vacancy_event(0, 0, 8)), PreconditionError);
  EXPECT_THROW(decoupling_probe(cfg, vacancy_event(0, 0, 0), occupancy_event(-2, 2, 8)), PreconditionError);
  EXPECT_THROW(decoupling_probe(cfg, vacancy_event(0, 0, 1), vacancy_event(0, 0, 8)), PreconditionError);
  EXPECT_THROW(decoupling_probe(cfg, vacancy_event(0, 0, 0), vacancy_event(0, 0, 0)), PreconditionError);
}
