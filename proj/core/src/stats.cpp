#include "rwdre/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "rwdre/error.hpp"
#include "rwdre/parallel.hpp"
#include "rwdre/rng.hpp"

namespace rwdre::stats {

namespace {

void validate(const EnsembleConfig& cfg) {
  cfg.w.validate();
  require(cfg.rho >= 0.0, "rho must be nonnegative");
  require(cfg.q >= 0.0 && cfg.q <= 1.0, "q must lie in [0,1]");
  require(cfg.n >= 1, "n must be >= 1");
  require(cfg.replicas >= 2, "need at least two replicas");
  const double work = estimated_work(cfg);
  if (work > cfg.max_work) {
    std::ostringstream os;
    os << "estimated work " << work << " exceeds the guard " << cfg.max_work;
    throw ResourceError(os.str());
  }
}

walker::Path walk_path(const EnsembleConfig& cfg, std::size_t r) {
  const env::Environment e(walker::walk_window(cfg.rho, cfg.q, cfg.n, 0, hash_keys(cfg.seed, {r, 0})));
  const env::WalkCursor cur(e);
  return walker::run_walk(cur, walker::UniformField(hash_keys(cfg.seed, {r, 1})), cfg.w, {0, 0}, cfg.n);
}

std::vector<double> standardized(const std::vector<double>& x, double shift, double scale) {
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - shift) / scale;
  return z;
}

// sd((a - mean a)(b - mean b)) / sqrt(N): influence-function SE of the plug-in covariance
Estimate covariance_estimate(const std::vector<double>& a, const std::vector<double>& b) {
  const double N = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / N;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / N;
  std::vector<double> psi(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) psi[i] = (a[i] - ma) * (b[i] - mb);
  const auto m = stat::moments(psi);
  return {m.mean, m.se()};
}

env::EnvConfig event_window(const Event& f1, const Event& f2, double rho, double q, std::uint64_t seed) {
  const std::int64_t t_lo = std::min<std::int64_t>(f1.support.n0, 0);
  const std::int64_t t_hi = std::max<std::int64_t>(f2.support.n1, 0);
  const std::int64_t reach = std::max(-t_lo, t_hi) + 1;
  env::EnvConfig c;
  c.rho = rho;
  c.q = q;
  c.x_min = std::min(f1.support.a, f2.support.a) - reach;
  c.x_max = std::max(f1.support.b, f2.support.b) + reach;
  c.t_min = t_lo;
  c.t_max = t_hi;
  c.seed = seed;
  return c;
}

}  // namespace

double estimated_work(const EnsembleConfig& cfg) {
  const double n = static_cast<double>(cfg.n);
  double per = n;
  if (cfg.w.p_circ != cfg.w.p_bullet) per += cfg.rho * (n * n / env::kBlock + 4.0 * n);
  return per * static_cast<double>(cfg.replicas);
}

std::vector<std::vector<std::int64_t>> sample_positions(const EnsembleConfig& cfg,
                                                        const std::vector<std::int64_t>& times) {
  validate(cfg);
  for (std::int64_t t : times) require(t >= 0 && t <= cfg.n, "times must lie in [0, n]");
  std::vector<std::vector<std::int64_t>> out(cfg.replicas);
  parallel_for(cfg.replicas, [&](std::size_t r) {
    const auto p = walk_path(cfg, r);
    out[r].reserve(times.size());
    for (std::int64_t t : times) out[r].push_back(p.x[static_cast<std::size_t>(t)]);
  });
  return out;
}

EnsembleSummary summarize_speed(std::vector<double> X, std::int64_t n, double level) {
  require(X.size() >= 2 && n >= 1, "need two replicas and n >= 1");
  require(level > 0.0 && level < 1.0, "level must lie in (0,1)");
  EnsembleSummary s;
  s.replicas = X.size();
  s.n = n;
  s.level = level;
  std::vector<double> v(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) v[i] = X[i] / static_cast<double>(n);
  const auto m = stat::moments(v);
  s.v_hat = m.mean;
  s.se = m.se();
  const double z = stat::normal_quantile(0.5 + level / 2.0);
  s.ci_lo = s.v_hat - z * s.se;
  s.ci_hi = s.v_hat + z * s.se;
  s.X = std::move(X);
  return s;
}

EnsembleSummary estimate_speed(const EnsembleConfig& cfg, double level) {
  const auto pos = sample_positions(cfg, {cfg.n});
  std::vector<double> X(pos.size());
  for (std::size_t r = 0; r < pos.size(); ++r) X[r] = static_cast<double>(pos[r][0]);
  return summarize_speed(std::move(X), cfg.n, level);
}

bool speed_sandwich(const EnsembleSummary& s, const walker::WalkParams& w) {
  const double lo = std::min(w.v_circ(), w.v_bullet()), hi = std::max(w.v_circ(), w.v_bullet());
  return s.ci_hi >= lo && s.ci_lo <= hi;
}

Estimate ensemble_sigma2(const std::vector<double>& X, std::int64_t n) {
  require(X.size() >= 4 && n >= 1, "need four replicas and n >= 1");
  const auto m = stat::moments(X);
  std::vector<double> sq(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) sq[i] = (X[i] - m.mean) * (X[i] - m.mean);
  const auto s = stat::moments(sq);
  return {m.var / static_cast<double>(n), s.se() / static_cast<double>(n)};
}

Estimate batch_means_sigma2(const std::vector<std::vector<std::int64_t>>& paths, int batches) {
  require(batches >= 2, "need at least two batches");
  require(paths.size() >= 2, "need at least two paths");
  const std::size_t steps = paths[0].size() - 1;
  const std::size_t m = steps / static_cast<std::size_t>(batches);
  require(m >= 1, "paths are shorter than the batch count");
  const std::size_t used = m * static_cast<std::size_t>(batches);
  double total = 0.0;
  for (const auto& p : paths) {
    require(p.size() == steps + 1, "paths must have equal length");
    total += static_cast<double>(p[used] - p[0]);
  }
  const double v = total / (static_cast<double>(paths.size()) * static_cast<double>(used));
  std::vector<double> s(paths.size());
  for (std::size_t r = 0; r < paths.size(); ++r) {
    double acc = 0.0;
    for (int i = 0; i < batches; ++i) {
      const double B = static_cast<double>(paths[r][(i + 1) * m] - paths[r][i * m]) - static_cast<double>(m) * v;
      acc += B * B;
    }
    s[r] = acc / static_cast<double>(used);
  }
  const auto mo = stat::moments(s);
  return {mo.mean, mo.se()};
}

double joint_z(const Estimate& a, const Estimate& b) {
  const double se = std::hypot(a.se, b.se);
  if (se == 0.0) return a.value == b.value ? 0.0 : std::numeric_limits<double>::infinity();
  return std::fabs(a.value - b.value) / se;
}

CltReport clt_test(const EnsembleConfig& cfg, double v_hat, double sigma_hat, std::vector<double> fractions) {
  if (!(sigma_hat > 0.0)) throw ParameterError("sigma_hat must be positive");
  require(!fractions.empty(), "need at least one time fraction");
  for (double f : fractions) require(f > 0.0 && f <= 1.0, "time fractions must lie in (0,1]");
  CltReport rep;
  rep.fractions = fractions;
  std::vector<std::int64_t> times;
  for (double f : fractions) times.push_back(std::max<std::int64_t>(1, std::llround(f * static_cast<double>(cfg.n))));
  for (std::int64_t m = 1; m <= cfg.n; m *= 2)
    if (16 * m >= cfg.n) rep.var_times.push_back(m);
  std::vector<std::int64_t> all = times;
  all.insert(all.end(), rep.var_times.begin(), rep.var_times.end());
  all.push_back(cfg.n);
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  const auto pos = sample_positions(cfg, all);
  auto column = [&](std::int64_t t, std::size_t stride, std::size_t offset) {
    const auto k = static_cast<std::size_t>(std::lower_bound(all.begin(), all.end(), t) - all.begin());
    std::vector<double> c;
    for (std::size_t r = offset; r < pos.size(); r += stride) c.push_back(static_cast<double>(pos[r][k]));
    return c;
  };
  auto normal = [](double x) { return stat::normal_cdf(x); };
  const double n = static_cast<double>(cfg.n);
  rep.terminal = stat::ks_one_sample(standardized(column(cfg.n, 1, 0), n * v_hat, std::sqrt(n) * sigma_hat), normal);
  std::vector<std::vector<double>> z;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = static_cast<double>(times[k]);
    z.push_back(standardized(column(times[k], times.size(), k), t * v_hat, std::sqrt(t) * sigma_hat));
    rep.marginals.push_back(stat::ks_one_sample(z.back(), normal));
  }
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = i + 1; j < z.size(); ++j) rep.pairwise.push_back(stat::ks_two_sample(z[i], z[j]));
  std::vector<double> lx, ly;
  for (std::int64_t m : rep.var_times) {
    const double var = stat::moments(column(m, 1, 0)).var;
    rep.var_values.push_back(var);
    if (var > 0.0) {
      lx.push_back(std::log(static_cast<double>(m)));
      ly.push_back(std::log(var));
    }
  }
  if (lx.size() >= 2) rep.var_slope = stat::linear_fit(lx, ly);
  return rep;
}

BallisticityReport ballisticity_probe(const EnsembleConfig& cfg, double v_star, std::vector<double> Ls) {
  if (!(v_star > 0.0 && v_star <= 1.0)) throw PreconditionError("v_star must lie in (0,1]");
  require(!Ls.empty(), "need at least one L");
  validate(cfg);
  std::sort(Ls.begin(), Ls.end());
  std::vector<double> low(cfg.replicas);
  parallel_for(cfg.replicas, [&](std::size_t r) {
    const auto p = walk_path(cfg, r);
    double m = 0.0;
    for (std::size_t i = 0; i < p.x.size(); ++i)
      m = std::min(m, static_cast<double>(p.x[i]) - static_cast<double>(i) * v_star);
    low[r] = m;
  });
  BallisticityReport rep;
  rep.v_star = v_star;
  rep.horizon = cfg.n;
  rep.replicas = cfg.replicas;
  const double N = static_cast<double>(cfg.replicas);
  for (double L : Ls) {
    BallisticityRow row;
    row.L = L;
    row.hits = static_cast<std::size_t>(std::count_if(low.begin(), low.end(), [&](double m) { return m < -L; }));
    row.p_hat = static_cast<double>(row.hits) / N;
    row.se = std::sqrt(row.p_hat * (1.0 - row.p_hat) / N);
    rep.rows.push_back(row);
  }
  for (std::size_t i = 0; i < rep.rows.size(); ++i)
    for (std::size_t j = i + 1; j < rep.rows.size(); ++j)
      if (rep.rows[j].p_hat > rep.rows[i].p_hat + 2.0 * std::hypot(rep.rows[i].se, rep.rows[j].se)) rep.monotone = false;
  std::vector<double> cx, cy, x, y, gx, gy;
  for (const auto& row : rep.rows) {
    cx.push_back(row.L);
    cy.push_back(std::log((static_cast<double>(row.hits) + 0.5) / (N + 1.0)));
    if (row.hits == 0) continue;
    x.push_back(row.L);
    y.push_back(std::log(row.p_hat));
    if (row.p_hat < 1.0 && row.L > std::exp(1.0)) {
      gx.push_back(std::log(std::log(row.L)));
      gy.push_back(std::log(-std::log(row.p_hat)));
    }
  }
  if (cx.size() >= 2) rep.slope_L = stat::linear_fit(cx, cy);
  if (x.size() >= 2) rep.slope_L_nonzero = stat::linear_fit(x, y);
  if (gx.size() >= 2) rep.gamma = stat::linear_fit(gx, gy).slope;
  return rep;
}

CovarianceRow covariance_empirical(double rho, double q, int n, std::size_t replicas, std::uint64_t seed) {
  require(n >= 1, "n must be >= 1");
  require(rho >= 0.0, "rho must be nonnegative");
  require(replicas >= 2, "need at least two replicas");
  std::vector<double> a(replicas), b(replicas);
  parallel_for(replicas, [&](std::size_t r) {
    env::EnvConfig c;
    c.rho = rho;
    c.q = q;
    c.x_min = -2 * static_cast<std::int64_t>(n) - 1;
    c.x_max = 2 * static_cast<std::int64_t>(n) + 1;
    c.t_min = 0;
    c.t_max = n;
    c.seed = hash_keys(seed, {r});
    const env::Environment e(c);
    a[r] = e.occupied(0, 0);
    b[r] = e.occupied(0, n);
  });
  const auto est = covariance_estimate(a, b);
  CovarianceRow row;
  row.n = n;
  row.replicas = replicas;
  row.cov = est.value;
  row.se = est.se;
  row.theory = env::covariance_theory(rho, q, n);
  const double sq = std::sqrt(static_cast<double>(n));
  row.sqrt_n_cov = sq * row.cov;
  row.sqrt_n_cov_se = sq * row.se;
  return row;
}

Estimate plateau_ratio(const CovarianceRow& a, const CovarianceRow& b) {
  require(a.sqrt_n_cov != 0.0 && b.sqrt_n_cov != 0.0, "plateau ratio needs nonzero covariances");
  const double r = b.sqrt_n_cov / a.sqrt_n_cov;
  return {r, std::fabs(r) * std::hypot(a.sqrt_n_cov_se / a.sqrt_n_cov, b.sqrt_n_cov_se / b.sqrt_n_cov)};
}

Event vacancy_event(std::int64_t a, std::int64_t b, std::int64_t n) {
  Event e;
  e.name = "vacant[" + std::to_string(a) + "," + std::to_string(b) + "]@" + std::to_string(n);
  e.support = {a, b, n, n};
  e.f = [a, b, n](const env::Occupancy& occ) {
    for (std::int64_t x = a; x <= b; ++x)
      if (occ.occupied(x, n)) return false;
    return true;
  };
  return e;
}

Event occupancy_event(std::int64_t a, std::int64_t b, std::int64_t n) {
  Event e = vacancy_event(a, b, n);
  e.name = "occupied[" + std::to_string(a) + "," + std::to_string(b) + "]@" + std::to_string(n);
  e.f = [v = e.f](const env::Occupancy& occ) { return !v(occ); };
  return e;
}

Event always_event(std::int64_t n) {
  Event e;
  e.name = "always@" + std::to_string(n);
  e.support = {0, 0, n, n};
  e.f = [](const env::Occupancy&) { return true; };
  return e;
}

DecouplingReport decoupling_probe(const DecouplingConfig& cfg, const Event& f1, const Event& f2) {
  require(cfg.rho > 0.0, "rho must be positive");
  require(cfg.replicas >= 2, "need at least two replicas");
  require(f1.support.a <= f1.support.b && f2.support.a <= f2.support.b, "event supports must be nonempty");
  if (f1.support.n1 > 0) throw PreconditionError("f1 must be supported at times <= 0");
  if (f2.support.n0 < 1 || f2.support.n1 < f2.support.n0) throw PreconditionError("f2 must be supported at times >= 1");
  DecouplingReport rep;
  rep.n = f2.support.n0;
  rep.rho = cfg.rho;
  rep.rho_sprinkled = cfg.rho_sprinkled ? *cfg.rho_sprinkled
                                        : cfg.rho * (1.0 + std::pow(static_cast<double>(rep.n), -1.0 / 16.0));
  require(rep.rho_sprinkled >= cfg.rho, "sprinkled density must be at least rho");
  rep.replicas = cfg.replicas;

  // one extra particle must never switch an event on: first in the empty configuration,
  // with the particle parked on each support site, then on sampled configurations
  auto spot = [&](const env::Environment& e, const Event& ev, std::int64_t site) {
    env::Trajectory pin;
    pin.t0 = e.t_min();
    pin.x.assign(static_cast<std::size_t>(e.t_max() - e.t_min() + 1), site);
    const env::AugmentedOccupancy more(e, {pin});
    if (ev.f(more) && !ev.f(e))
      throw PreconditionError("event " + ev.name + " is not non-increasing: an extra particle switched it on");
  };
  {
    const env::Environment empty(event_window(f1, f2, 0.0, cfg.q, cfg.seed));
    for (const Event* ev : {&f1, &f2})
      for (std::int64_t x = ev->support.a; x <= ev->support.b; ++x) spot(empty, *ev, x);
  }
  for (std::size_t k = 0; k < cfg.monotone_checks; ++k) {
    const env::Environment e(event_window(f1, f2, cfg.rho, cfg.q, hash_keys(cfg.seed, {k, 7})));
    for (const Event* ev : {&f1, &f2}) {
      const std::int64_t width = ev->support.b - ev->support.a + 1;
      spot(e, *ev, ev->support.a + static_cast<std::int64_t>(k % static_cast<std::size_t>(width)));
    }
  }

  const std::size_t N = cfg.replicas;
  std::vector<double> A(N), B(N), C(N), D(N);
  parallel_for(N, [&](std::size_t i) {
    const env::Environment hi(event_window(f1, f2, rep.rho_sprinkled, cfg.q, hash_keys(cfg.seed, {i, 1})));
    const bool g1 = f1.f(hi);
    B[i] = g1;
    A[i] = g1 && f2.f(hi);
    const env::Environment lo(event_window(f1, f2, cfg.rho, cfg.q, hash_keys(cfg.seed, {i, 2})));
    C[i] = f2.f(lo);
    D[i] = f1.f(lo);
  });
  const auto mA = stat::moments(A), mB = stat::moments(B), mC = stat::moments(C);
  rep.lhs = mA.mean;
  rep.rhs = mB.mean * mC.mean;
  rep.gap = rep.lhs - rep.rhs;
  std::vector<double> lin(N);
  for (std::size_t i = 0; i < N; ++i) lin[i] = A[i] - mC.mean * B[i];
  const double Nd = static_cast<double>(N);
  rep.gap_se = std::sqrt(stat::moments(lin).var / Nd + mB.mean * mB.mean * mC.var / Nd);
  rep.sprinkled_holds = rep.gap <= 3.0 * rep.gap_se;
  const auto cov = covariance_estimate(D, C);
  rep.cov = cov.value;
  rep.cov_se = cov.se;
  rep.fkg_holds = rep.cov >= -3.0 * rep.cov_se;
  return rep;
}

}  // namespace rwdre::stats
