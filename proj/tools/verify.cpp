#include "verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "rwdre/env.hpp"
#include "rwdre/error.hpp"
#include "rwdre/kernel.hpp"
#include "rwdre/parallel.hpp"
#include "rwdre/regen.hpp"
#include "rwdre/renorm.hpp"
#include "rwdre/rng.hpp"
#include "rwdre/slt.hpp"
#include "rwdre/stat_tests.hpp"
#include "rwdre/stats.hpp"
#include "rwdre/walker.hpp"

namespace rwdre::verify {

namespace {

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::uint64_t key(const Options& o, int id, std::uint64_t sub) {
  return hash_keys(o.seed, {static_cast<std::uint64_t>(id), sub});
}

bool full(const Options& o) { return o.level == Level::Full; }

void add(Criterion& c, std::string name, bool pass, std::string detail) {
  c.checks.push_back({std::move(name), pass, std::move(detail)});
}

double exp_cdf(double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); }

// ---- 1: kernel exactness

kernel::HeatKernel make_kernel(double q, int n, Fault f) {
  auto k = kernel::heat_kernel(q, n);
  if (f != Fault::Kernel) return k;
  auto v = k.values();
  v[static_cast<std::size_t>(n)] *= 1.0 + 1e-6;
  return kernel::HeatKernel(q, n, std::move(v));
}

void kernel_exactness(Criterion& c, const Options& o) {
  const double qs[] = {0.0, 0.25, 0.5, 1.0};
  double norm = 0.0, semi = 0.0;
  std::size_t asym = 0;
  for (double q : qs) {
    std::vector<kernel::HeatKernel> ks;
    for (int n = 0; n <= 256; ++n) {
      ks.push_back(make_kernel(q, n, o.fault));
      const auto& k = ks.back();
      norm = std::max(norm, std::fabs(k.sum() - 1.0));
      const auto& v = k.values();
      for (std::size_t i = 0; i < v.size(); ++i) asym += v[i] != v[v.size() - 1 - i];
    }
    for (int m = 1; m <= 32; ++m)
      for (int n = 1; n <= 32; ++n) {
        const auto conv = kernel::convolve(ks[m], ks[n]);
        const auto& direct = ks[m + n].values();
        for (std::size_t i = 0; i < conv.size(); ++i) semi = std::max(semi, std::fabs(conv[i] - direct[i]));
      }
  }
  add(c, "normalization", norm <= 1e-12, "max |sum p_n - 1| = " + num(norm) + " (tol 1e-12)");
  add(c, "symmetry", asym == 0, std::to_string(asym) + " asymmetric entries");
  add(c, "semigroup", semi <= 1e-12, "max |p_m * p_n - p_{m+n}| = " + num(semi) + " for m,n <= 32 (tol 1e-12)");
  const double p2 = make_kernel(0.5, 2, o.fault)(0);
  add(c, "p_2(0,0) at q=0.5", std::fabs(p2 - 0.375) <= 1e-15, "p_2(0,0) = " + num(p2) + " (expect 0.375)");
}

// ---- 2: covariance formula

void covariance_formula(Criterion& c, const Options& o) {
  const std::size_t reps = full(o) ? 100000 : 20000;
  for (int n : {2, 8, 32}) {
    const auto r = stats::covariance_empirical(1.0, 0.5, n, reps, key(o, 2, static_cast<std::uint64_t>(n)));
    const double z = std::fabs(r.cov - r.theory) / r.se;
    add(c, "C(" + std::to_string(n) + ") vs theory", r.se > 0.0 && z <= 3.0,
        "cov = " + num(r.cov) + " +- " + num(r.se) + ", theory " + num(r.theory) + ", z = " + num(z));
  }
  std::vector<stats::CovarianceRow> rows;
  for (int n : {64, 128, 256})
    rows.push_back(stats::covariance_empirical(1.0, 0.5, n, reps, key(o, 2, static_cast<std::uint64_t>(n))));
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const auto r = stats::plateau_ratio(rows[i], rows[i + 1]);
    add(c, "sqrt(n) C(n) ratio " + std::to_string(rows[i + 1].n) + "/" + std::to_string(rows[i].n),
        std::fabs(r.value - 1.0) <= 2.0 * r.se,
        "ratio = " + num(r.value) + " +- " + num(r.se) + " (sqrt(n) C = " + num(rows[i].sqrt_n_cov) + ", " +
            num(rows[i + 1].sqrt_n_cov) + ")");
  }
}

// ---- 3: homogeneous LLN / CLT

void homogeneous(Criterion& c, const Options& o) {
  stats::EnsembleConfig cfg;
  cfg.w = {0.7, 0.7};
  cfg.n = 5000;
  cfg.replicas = 400;
  cfg.seed = key(o, 3, 0);
  const auto s = stats::estimate_speed(cfg);
  add(c, "speed at p=0.7", std::fabs(s.v_hat - 0.4) <= 0.02,
      "v_hat = " + num(s.v_hat) + " +- " + num(s.se) + " (|v_hat - 0.4| <= 0.02)");

  stats::EnsembleConfig srw;
  srw.w = {0.5, 0.5};
  srw.n = 4096;
  srw.replicas = 1000;
  srw.seed = key(o, 3, 1);
  const auto pos = stats::sample_positions(srw, {srw.n});
  std::vector<double> z;
  for (const auto& p : pos) z.push_back(static_cast<double>(p.back()) / std::sqrt(static_cast<double>(srw.n)));
  const auto ks = stat::ks_one_sample(z, stat::normal_cdf);
  add(c, "X_n / sqrt(n) vs N(0,1)", ks.p_value > 0.01, "KS D = " + num(ks.statistic) + ", p = " + num(ks.p_value));
}

// ---- 4: inhomogeneous LLN

void inhomogeneous(Criterion& c, const Options& o) {
  stats::EnsembleConfig cfg;
  cfg.w = {0.3, 0.8};
  cfg.rho = 1.0;
  cfg.n = full(o) ? 5000 : 2000;
  cfg.replicas = full(o) ? 400 : 100;
  cfg.seed = key(o, 4, 0);
  const auto s1 = stats::estimate_speed(cfg);
  add(c, "sandwich at rho=1", stats::speed_sandwich(s1, cfg.w),
      "v_hat = " + num(s1.v_hat) + ", CI [" + num(s1.ci_lo) + ", " + num(s1.ci_hi) + "] vs [-0.4, 0.6]");
  // rho = 50 costs about 1.6 s per path at n = 5000 on one core, hence fewer paths
  cfg.rho = 50.0;
  cfg.replicas = full(o) ? 64 : 16;
  cfg.seed = key(o, 4, 1);
  const auto s50 = stats::estimate_speed(cfg);
  const double diff = s50.v_hat - s1.v_hat, se = std::hypot(s1.se, s50.se);
  add(c, "v(rho=50) - v(rho=1) > 3 SE", diff > 3.0 * se,
      "v_hat(50) = " + num(s50.v_hat) + " +- " + num(s50.se) + ", diff = " + num(diff) + ", 3 SE = " + num(3.0 * se));
}

// ---- 5: ballisticity decay

void ballisticity(Criterion& c, const Options& o) {
  stats::EnsembleConfig cfg;
  cfg.w = {0.7, 0.9};
  cfg.rho = 1.0;
  cfg.n = full(o) ? 10000 : 2000;
  cfg.replicas = full(o) ? 1000 : 200;
  cfg.seed = key(o, 5, 0);
  const auto rep = stats::ballisticity_probe(cfg, 0.3, {5, 10, 20, 40});
  std::string rows;
  for (const auto& r : rep.rows) rows += (rows.empty() ? "" : ", ") + num(r.L) + ":" + std::to_string(r.hits);
  add(c, "non-increasing in L", rep.monotone, "hits per L {" + rows + "} of " + std::to_string(rep.replicas));
  add(c, "log P vs L slope < 0", rep.slope_L.slope < 0.0,
      "slope = " + num(rep.slope_L.slope) + " +- " + num(rep.slope_L.slope_se));
}

// ---- 6: monotone couplings

void couplings(Criterion& c, const Options& o) {
  const std::size_t trials = full(o) ? 1000 : 200;
  const std::int64_t steps = 200;
  std::vector<char> v_init(trials, 0), v_env(trials, 0), strict(trials, 0);
  parallel_for(trials, [&](std::size_t t) {
    const env::Environment e(walker::walk_window(1.0, 0.5, steps, 4, key(o, 6, 2 * t)));
    const env::WalkCursor cur(e);
    const walker::UniformField U(key(o, 6, 2 * t + 1));
    try {
      auto [a, b] = walker::coupled_pair_initial(cur, U, {0.35, 0.75}, {-2, 0}, {2, 0}, steps);
      for (std::size_t i = 0; i < a.x.size(); ++i) v_init[t] |= a.x[i] > b.x[i];
    } catch (const SimulationError&) {
      v_init[t] = 1;
    }
    env::Trajectory pinned;
    pinned.x.assign(static_cast<std::size_t>(steps) + 1, 0);
    const env::WalkCursor cur2(e);
    try {
      auto [a, b] = walker::coupled_pair_environment(cur2, {pinned}, U, {0.3, 0.8}, {0, 0}, steps);
      for (std::size_t i = 0; i < a.x.size(); ++i) v_env[t] |= a.x[i] > b.x[i];
      strict[t] = a.x.back() < b.x.back();
    } catch (const SimulationError&) {
      v_env[t] = 1;
    }
  });
  const auto count = [](const std::vector<char>& v) { return std::count(v.begin(), v.end(), 1); };
  add(c, "initial-position coupling", count(v_init) == 0,
      std::to_string(count(v_init)) + " violations in " + std::to_string(trials) + " trials");
  add(c, "environment coupling", count(v_env) == 0,
      std::to_string(count(v_env)) + " violations in " + std::to_string(trials) + " trials (" +
          std::to_string(count(strict)) + " strictly separated)");
}

// ---- 7: regeneration structure

void regeneration(Criterion& c, const Options& o) {
  const std::size_t seeds = full(o) ? 500 : 100;
  const std::int64_t horizon = 20000;
  const int count = 3;
  const walker::WalkParams w{0.7, 0.9};
  std::vector<regen::RegenSequence> seqs(seeds);
  parallel_for(seeds, [&](std::size_t i) {
    const env::Environment e(regen::regen_window(1.0, 0.5, count * horizon, key(o, 7, 2 * i)));
    seqs[i] = regen::regen_sequence(e, walker::UniformField(key(o, 7, 2 * i + 1)), w, regen::RegenConfig{}, {0, 0},
                                    horizon, count);
  });
  std::size_t certified = 0;
  std::vector<double> tau(seeds, std::numeric_limits<double>::infinity());
  std::vector<double> dt1, dt2, dx1, dx2, dx, dt;
  for (std::size_t i = 0; i < seeds; ++i) {
    const auto& s = seqs[i].segments;
    if (!s.empty()) tau[i] = static_cast<double>(s[0].dt);
    certified += !s.empty() && s[0].certified;
    if (!seqs[i].complete) continue;
    dt1.push_back(static_cast<double>(s[1].dt));
    dx1.push_back(static_cast<double>(s[1].dx));
    dt2.push_back(static_cast<double>(s[2].dt));
    dx2.push_back(static_cast<double>(s[2].dx));
  }
  const double frac = static_cast<double>(certified) / static_cast<double>(seeds);
  add(c, "certified tau within horizon", frac >= 0.95,
      std::to_string(certified) + " of " + std::to_string(seeds) + " (" + num(frac) + ", need 0.95)");

  if (dt1.size() < 8) {
    add(c, "consecutive increments", false, "only " + std::to_string(dt1.size()) + " complete sequences");
    return;
  }
  const auto kt = stat::ks_two_sample(dt1, dt2), kx = stat::ks_two_sample(dx1, dx2);
  add(c, "increments 2 vs 3: dt", kt.p_value > 0.01,
      "KS D = " + num(kt.statistic) + ", p = " + num(kt.p_value) + " on " + std::to_string(dt1.size()) + " pairs");
  add(c, "increments 2 vs 3: dx", kx.p_value > 0.01, "KS D = " + num(kx.statistic) + ", p = " + num(kx.p_value));

  dx = dx1;
  dx.insert(dx.end(), dx2.begin(), dx2.end());
  dt = dt1;
  dt.insert(dt.end(), dt2.begin(), dt2.end());
  const auto v_reg = regen::speed_from_increments(dx, dt);
  stats::EnsembleConfig cfg;
  cfg.w = w;
  cfg.rho = 1.0;
  cfg.n = 5000;
  cfg.replicas = full(o) ? 400 : 100;
  cfg.seed = key(o, 7, 1u << 30);
  const auto direct = stats::estimate_speed(cfg);
  const double z = stats::joint_z({v_reg.value, v_reg.se}, {direct.v_hat, direct.se});
  add(c, "E[X_tau]/E[tau] vs direct speed", z <= 3.0,
      "regeneration " + num(v_reg.value) + " +- " + num(v_reg.se) + ", direct " + num(direct.v_hat) + " +- " +
          num(direct.se) + ", z = " + num(z));

  // log P(tau > t) / log^{3/2} t over the top decile of the first regeneration time
  std::sort(tau.begin(), tau.end());
  const auto N = static_cast<double>(seeds);
  double worst = -std::numeric_limits<double>::infinity();
  int points = 0;
  for (std::size_t i = static_cast<std::size_t>(std::ceil(0.9 * N)); i < seeds; ++i) {
    const double t = tau[i];
    if (!std::isfinite(t) || t <= std::exp(1.0)) continue;
    const auto above = static_cast<double>(tau.end() - std::upper_bound(tau.begin(), tau.end(), t));
    if (above == 0.0) continue;
    worst = std::max(worst, std::log(above / N) / std::pow(std::log(t), 1.5));
    ++points;
  }
  add(c, "tau tail on the top decile", points > 0 && worst < 0.0,
      "max log P(tau > t) / log^{3/2} t = " + num(worst) + " over " + std::to_string(points) + " points");
}

// ---- 8: soft local times

void soft_local_times(Criterion& c, const Options& o) {
  const std::vector<double> mu{1.0, 0.5, 2.0, 1.0};
  const std::vector<double> g{0.1, 0.8, 0.15, 0.2};
  const std::size_t N = 10000;
  std::vector<double> xi(N);
  std::vector<std::size_t> site(N);
  parallel_for(N, [&](std::size_t r) {
    const auto m = slt::sample_point_process({0, 1, 2, 3}, mu, 0.5, key(o, 8, r));
    const auto d = slt::simulate_one(m, slt::Density{0, g}).draw;
    xi[r] = d.xi;
    site[r] = d.site;
  });
  const auto ks = stat::ks_one_sample(xi, exp_cdf);
  add(c, "xi vs Exp(1)", ks.p_value > 0.01, "KS D = " + num(ks.statistic) + ", p = " + num(ks.p_value));
  std::vector<double> obs(4, 0.0), expected(4);
  for (auto s : site) obs[s] += 1.0;
  for (std::size_t s = 0; s < 4; ++s) expected[s] = static_cast<double>(N) * g[s] * mu[s];
  const auto chi = stat::chi2_gof(obs, expected);
  add(c, "z_hat vs g mu", chi.p_value > 0.01, "chi2 = " + num(chi.statistic) + ", p = " + num(chi.p_value));

  const std::vector<std::int64_t> five{0, 1, 2, 3, 4};
  const std::vector<slt::Density> gs(8, slt::Density{0, std::vector<double>(5, 0.2)});
  const auto dom = slt::domination_check(five, std::vector<double>(5, 1.0), gs, 1.0, full(o) ? 10000 : 2000,
                                         key(o, 8, 1u << 30));
  add(c, "domination, J=8 on 5 sites", dom.holds && dom.implication_violations == 0,
      "P(dominate) = " + num(dom.lhs_hat) + ", P(G_J >= rho) = " + num(dom.rhs_hat) + ", joint SE " +
          num(dom.joint_se) + ", implication violations " + std::to_string(dom.implication_violations));

  const int L = 4, n = 400;
  const auto H = kernel::interval_sites(-n, L - 1 + n);
  slt::CouplingConfig cfg;
  cfg.n = n;
  cfg.rho = 1.0;
  cfg.rho_prime = 0.5;
  cfg.replicas = full(o) ? 1000 : 300;
  cfg.seed = key(o, 8, (1u << 30) + 1);
  const auto cp = slt::endpoint_coupling(H, kernel::Paving(H, L), kernel::interval_sites(0, L - 1), cfg);
  // the fitted bound is vacuous at desk-scale n, so the Chernoff form is required as well
  add(c, "endpoint coupling vs fitted bound", cp.holds && cp.holds_chernoff,
      "frequency " + num(cp.frequency.estimate) + " [" + num(cp.frequency.lo) + ", " + num(cp.frequency.hi) +
          "], fitted bound " + num(cp.fitted_bound) + ", Chernoff bound " + num(cp.chernoff_bound));
}

// ---- 9: renormalisation ladder

void ladder(Criterion& c, const Options& o) {
  renorm::LadderConfig lc;  // L0 = 100, v = 0.2, v_bullet = 0.6, kmax = 12
  const auto lad = renorm::build_ladder(lc);
  const renorm::BigInt expect[] = {100, 1000, 31000, 5456000};
  bool exact = lad.L.size() >= 4;
  for (std::size_t k = 0; exact && k < 4; ++k) exact = lad.L[k] == expect[k];
  std::string shown;
  for (std::size_t k = 0; k < std::min<std::size_t>(4, lad.L.size()); ++k)
    shown += (k ? ", " : "") + lad.L[k].str();
  add(c, "L_0..L_3", exact, "[" + shown + "]");
  const double res = renorm::v_limit_residual(lad);
  add(c, "v_k limit", res <= 1e-12, "residual " + num(res) + " (tol 1e-12)");
  bool increasing = true;
  for (std::size_t k = 0; k + 1 < lad.rho.size(); ++k) increasing = increasing && lad.rho[k + 1] > lad.rho[k];
  const double last = lad.rho[lad.rho.size() - 1] / lad.rho[lad.rho.size() - 2] - 1.0;
  add(c, "rho_k partial products", increasing && last <= 1e-6,
      std::string(increasing ? "increasing" : "not increasing") + ", final ratio - 1 = " + num(last));

  renorm::LadderConfig small;
  small.L0 = 16;
  small.v = -0.9;
  small.v_bullet = 0.8;
  small.k_max = 4;
  const auto lad16 = renorm::build_ladder(small);
  const int k = 1;
  const std::size_t reps = full(o) ? 200 : 32;
  std::vector<char> violated(reps, 0), nonvacuous(reps, 0);
  parallel_for(reps, [&](std::size_t r) {
    const auto run = renorm::simulate_box_run(lad16, k, 0.1, 0.5, {0.15, 0.9}, key(o, 9, r));
    const auto v = renorm::three_slow_boxes_check(lad16, k, run);
    violated[r] = !v.holds || !v.layers_consistent;
    nonvacuous[r] = !v.vacuous;
  });
  const auto bad = std::count(violated.begin(), violated.end(), 1);
  const auto live = std::count(nonvacuous.begin(), nonvacuous.end(), 1);
  add(c, "three slow boxes, L0=16, k=1", bad == 0 && live > 0,
      std::to_string(bad) + " violations in " + std::to_string(reps) + " runs, " + std::to_string(live) +
          " with A_{k+1}; k2large at k: " + (renorm::k2large_holds(lad16, k) ? "yes" : "no"));
}

// ---- 10: tail sum

void tail_sum(Criterion& c, const Options&) {
  for (auto [beta, a] : {std::pair{0.0, 10.0}, {1.0, 60.0}, {1.0, 200.0}}) {
    const auto t = renorm::tail_sum_check(beta, a);
    add(c, "beta=" + num(beta) + ", a=" + num(a), t.holds && t.remainder_certified,
        "lhs + remainder = " + num(t.lhs + t.remainder) + " <= D a^beta e^{-log^{3/2} a} = " + num(t.rhs) +
            ", remainder " + num(t.remainder) + (t.remainder_certified ? " (certified)" : " (not certified)"));
  }
}

// ---- 11: decoupling / FKG

void decoupling(Criterion& c, const Options& o) {
  std::vector<stats::DecouplingReport> reps;
  for (int n : {16, 64, 256}) {
    stats::DecouplingConfig cfg;
    cfg.replicas = full(o) ? 20000 : 5000;
    cfg.seed = key(o, 11, static_cast<std::uint64_t>(n));
    const auto r = stats::decoupling_probe(cfg, stats::vacancy_event(0, 0, 0), stats::vacancy_event(0, 0, n));
    add(c, "n=" + std::to_string(n) + " FKG", r.fkg_holds, "cov = " + num(r.cov) + " +- " + num(r.cov_se));
    add(c, "n=" + std::to_string(n) + " sprinkled", r.sprinkled_holds,
        "gap = " + num(r.gap) + " +- " + num(r.gap_se) + " at rho' = " + num(r.rho_sprinkled));
    reps.push_back(r);
  }
  bool decays = true;
  std::string covs;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    covs += (i ? ", " : "") + num(reps[i].cov);
    if (i + 1 < reps.size())
      decays = decays && reps[i + 1].cov <= reps[i].cov + 2.0 * std::hypot(reps[i].cov_se, reps[i + 1].cov_se);
  }
  add(c, "covariance decays in n", decays, "cov at n = 16, 64, 256: " + covs);
}

using Runner = void (*)(Criterion&, const Options&);

struct Entry {
  const char* title;
  Runner run;
};

const Entry kEntries[kCriteria] = {
    {"kernel exactness", kernel_exactness},
    {"covariance formula", covariance_formula},
    {"homogeneous LLN/CLT", homogeneous},
    {"inhomogeneous LLN", inhomogeneous},
    {"ballisticity decay", ballisticity},
    {"monotone couplings", couplings},
    {"regeneration structure", regeneration},
    {"soft local times", soft_local_times},
    {"renormalisation ladder", ladder},
    {"tail-sum lemma", tail_sum},
    {"decoupling/FKG", decoupling},
};

}  // namespace

bool Criterion::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

bool Report::pass() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const Criterion& c) { return c.pass(); });
}

std::vector<int> Report::failures() const {
  std::vector<int> out;
  for (const auto& c : criteria)
    if (!c.pass()) out.push_back(c.id);
  return out;
}

std::string criterion_title(int id) {
  require(id >= 1 && id <= kCriteria, "criterion id must be in 1.." + std::to_string(kCriteria));
  return kEntries[id - 1].title;
}

Criterion run_criterion(int id, const Options& opt) {
  Criterion c;
  c.id = id;
  c.title = criterion_title(id);
  try {
    kEntries[id - 1].run(c, opt);
  } catch (const Error& e) {
    add(c, "completed", false, e.what());
  }
  return c;
}

Report run(const Options& opt) {
  Report r;
  r.level = opt.level;
  r.seed = opt.seed;
  for (int id = 1; id <= kCriteria; ++id) {
    if (!opt.only.empty() && std::find(opt.only.begin(), opt.only.end(), id) == opt.only.end()) continue;
    r.criteria.push_back(run_criterion(id, opt));
  }
  return r;
}

std::string format_line(const Criterion& c) {
  return "criterion " + std::to_string(c.id) + " " + c.title + ": " + (c.pass() ? "PASS" : "FAIL");
}

std::string format(const Report& r, bool details) {
  std::ostringstream out;
  out << "verify level=" << level_name(r.level) << " seed=" << r.seed << "\n";
  for (const auto& c : r.criteria) {
    out << format_line(c) << "\n";
    if (!details) continue;
    for (const auto& k : c.checks) out << "  [" << (k.pass ? "pass" : "FAIL") << "] " << k.name << ": " << k.detail << "\n";
  }
  const auto f = r.failures();
  out << "result: " << (f.empty() ? "PASS" : "FAIL");
  if (!f.empty()) {
    out << " (failed:";
    for (int id : f) out << " " << id;
    out << ")";
  }
  out << "\n";
  return out.str();
}

Level parse_level(const std::string& s) {
  if (s == "quick") return Level::Quick;
  if (s == "full") return Level::Full;
  throw ParameterError("level must be quick or full, got " + s);
}

const char* level_name(Level l) { return l == Level::Quick ? "quick" : "full"; }

}  // namespace rwdre::verify
