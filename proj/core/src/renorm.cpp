#include "rwdre/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "rwdre/error.hpp"
#include "rwdre/parallel.hpp"
#include "rwdre/stat_tests.hpp"

namespace rwdre::renorm {

namespace mp = boost::multiprecision;
using env::floor_div;

double log_big(const BigInt& x) {
  require(x > 0, "log of a non-positive integer");
  const auto bits = static_cast<long>(mp::msb(x)) + 1;
  if (bits <= 60) return std::log(static_cast<double>(x.convert_to<std::int64_t>()));
  const long shift = bits - 60;
  const BigInt top = x >> shift;
  return std::log(static_cast<double>(top.convert_to<std::int64_t>())) + static_cast<double>(shift) * std::log(2.0);
}

std::int64_t ScaleLadder::L_native(int k) const {
  if (!exact(k) || L[static_cast<std::size_t>(k)] > std::numeric_limits<std::int64_t>::max())
    throw RangeError("L_" + std::to_string(k) + " does not fit in a 64-bit integer");
  return L[static_cast<std::size_t>(k)].convert_to<std::int64_t>();
}

BigInt ScaleLadder::root(int k) const {
  if (!exact(k)) throw RangeError("L_" + std::to_string(k) + " is only tracked through its logarithm");
  return mp::sqrt(L[static_cast<std::size_t>(k)]);
}

double ScaleLadder::log_root(int k) const {
  // beyond the exact range floor(sqrt L) = sqrt L to a relative error far below double precision
  return exact(k) ? log_big(root(k)) : 0.5 * log_L(k);
}

ScaleLadder build_ladder(const LadderConfig& cfg) {
  require(cfg.L0 >= 4, "L0 must be at least 4");
  require(cfg.v < cfg.v_bullet, "v must be below v_bullet");
  require(cfg.rho0 > 0.0, "rho0 must be positive");
  require(cfg.k_max >= 1 && cfg.k_max <= 60, "k_max must lie in [1,60]");
  ScaleLadder lad;
  lad.cfg = cfg;
  lad.delta = 0.5 * (cfg.v_bullet - cfg.v);
  lad.L.push_back(BigInt(cfg.L0));
  lad.logL.push_back(std::log(static_cast<double>(cfg.L0)));
  for (int k = 0; k < cfg.k_max; ++k) {
    if (lad.exact(k) && mp::msb(lad.L.back()) < kExactBits) {
      const BigInt& Lk = lad.L.back();
      lad.L.push_back(mp::sqrt(Lk) * Lk);
      lad.logL.push_back(log_big(lad.L.back()));
    } else {
      lad.logL.push_back(lad.log_root(k) + lad.log_L(k));
    }
  }
  const double c = lad.delta * 6.0 / (std::numbers::pi * std::numbers::pi);
  lad.v_k.assign(static_cast<std::size_t>(cfg.k_max) + 1, std::numeric_limits<double>::quiet_NaN());
  lad.v_k[1] = cfg.v_bullet - lad.delta;
  for (int k = 1; k < cfg.k_max; ++k)
    lad.v_k[static_cast<std::size_t>(k) + 1] = lad.v_k[static_cast<std::size_t>(k)] - c / (static_cast<double>(k) * k);
  lad.rho.push_back(cfg.rho0);
  for (int k = 0; k < cfg.k_max; ++k)
    lad.rho.push_back(lad.rho.back() * (1.0 + std::exp(-lad.log_L(k) / 16.0)));
  // continue the product past kmax; log L grows by half of itself each step
  double rho = lad.rho.back(), logL = lad.log_L(cfg.k_max);
  for (;;) {
    const double f = std::exp(-logL / 16.0);
    if (rho * f < rho * std::numeric_limits<double>::epsilon() / 4.0) break;
    rho *= 1.0 + f;
    logL *= 1.5;  // floor(sqrt L) = sqrt L to a relative error below 1e-9 here
  }
  lad.rho_star = rho;
  return lad;
}

double v_limit_residual(const ScaleLadder& lad) {
  const int K = lad.k_max();
  const double tail = boost::math::trigamma(static_cast<double>(K));
  const double c = lad.delta * 6.0 / (std::numbers::pi * std::numbers::pi);
  return std::fabs(lad.v_k[static_cast<std::size_t>(K)] - lad.cfg.v - c * tail);
}

bool k2large_holds(const ScaleLadder& lad, int k, double delta) {
  require(k >= 1 && k <= lad.k_max(), "k outside the ladder");
  const double lhs = delta * 6.0 / (std::numbers::pi * std::numbers::pi) / (static_cast<double>(k) * k);
  const double rhs = 4.0 * std::exp(-lad.log_root(k));
  return lhs >= rhs;
}

K0Result k0_threshold(double delta, const ScaleLadder& lad) {
  K0Result r;
  r.holds.assign(static_cast<std::size_t>(lad.k_max()) + 1, false);
  for (int k = 1; k <= lad.k_max(); ++k) r.holds[static_cast<std::size_t>(k)] = k2large_holds(lad, k, delta);
  r.k0 = lad.k_max() + 1;
  for (int k = lad.k_max(); k >= 1 && r.holds[static_cast<std::size_t>(k)]; --k) r.k0 = k;
  r.in_range = r.k0 <= lad.k_max();
  return r;
}

Rect box(std::int64_t L, Index m) { return {m.r * L - L, m.r * L + 2 * L, m.s * L, m.s * L + L}; }

Rect base_line(std::int64_t L, Index m) { return {m.r * L, m.r * L + L, m.s * L, m.s * L}; }

std::vector<Index> box_indices(std::int64_t Lk, std::int64_t Lk1) {
  require(Lk >= 1 && Lk1 >= Lk, "box_indices needs 1 <= L_k <= L_{k+1}");
  const Rect big = box(Lk1);
  std::vector<Index> out;
  // candidate ranges from the rectangle inequalities, then filtered exactly
  const std::int64_t r_lo = floor_div(big.x0 - 2 * Lk, Lk) - 1, r_hi = floor_div(big.x1 + Lk, Lk) + 1;
  const std::int64_t s_lo = floor_div(big.n0 - Lk, Lk) - 1, s_hi = floor_div(big.n1, Lk) + 1;
  for (std::int64_t s = s_lo; s <= s_hi; ++s)
    for (std::int64_t r = r_lo; r <= r_hi; ++r)
      if (box(Lk, {r, s}).intersects(big)) out.push_back({r, s});
  return out;
}

MinDisplacement min_displacement(const env::Occupancy& occ, const walker::UniformField& U,
                                 const walker::WalkParams& w, std::int64_t x0, std::int64_t n0, std::int64_t width,
                                 std::int64_t len) {
  require(width >= 0 && len >= 0, "width and len must be nonnegative");
  struct G {
    std::int64_t pos, start;
  };
  std::vector<G> gs;
  gs.reserve(static_cast<std::size_t>(width) + 1);
  for (std::int64_t x = x0; x <= x0 + width; ++x) gs.push_back({x, x});
  for (std::int64_t t = 0; t < len; ++t) {
    for (auto& g : gs) g.pos = walker::step(occ, U, w, {g.pos, n0 + t}).x;
    std::sort(gs.begin(), gs.end(), [](const G& a, const G& b) { return a.pos < b.pos || (a.pos == b.pos && a.start > b.start); });
    // merged walkers end together; the largest start has the smallest displacement
    gs.erase(std::unique(gs.begin(), gs.end(), [](const G& a, const G& b) { return a.pos == b.pos; }), gs.end());
  }
  MinDisplacement best{std::numeric_limits<std::int64_t>::max(), 0};
  for (const auto& g : gs)
    if (g.pos - g.start < best.value) best = {g.pos - g.start, g.start};
  return best;
}

bool bad_event(const env::Occupancy& occ, const walker::UniformField& U, const walker::WalkParams& w,
               std::int64_t L, double v, Index m) {
  const Rect I = base_line(L, m);
  const auto d = min_displacement(occ, U, w, I.x0, I.n0, L, L);
  return static_cast<double>(d.value) < v * static_cast<double>(L);
}

double box_cost(std::int64_t L) {
  const double l = static_cast<double>(L);
  return (3.0 * l + 1.0) * (l + 1.0) + (l + 1.0) * l;
}

namespace {

void guard(double cost, double max_site_steps) {
  if (cost > max_site_steps) {
    std::ostringstream os;
    os << "estimated cost " << cost << " site-steps per replica exceeds the guard " << max_site_steps;
    throw ResourceError(os.str());
  }
}

// Environment whose exact region covers the closed rectangle R.
env::Environment covering_env(const Rect& R, double rho, double q, std::uint64_t seed) {
  env::EnvConfig c;
  c.rho = rho;
  c.q = q;
  const std::int64_t h = std::max(std::abs(R.n0), std::abs(R.n1));
  c.x_min = R.x0 - h - 1;
  c.x_max = R.x1 + h + 1;
  c.t_min = std::min<std::int64_t>(R.n0, 0);
  c.t_max = std::max<std::int64_t>(R.n1, 0);
  c.seed = seed;
  return env::Environment(c);
}

}  // namespace

PkEstimate bad_event_monte_carlo(std::int64_t L, double v, double rho, double q, const walker::WalkParams& w,
                                 int replicas, std::uint64_t seed, double max_site_steps) {
  require(L >= 1, "L must be positive");
  require(replicas >= 1, "replicas must be positive");
  w.validate();
  guard(box_cost(L), max_site_steps);
  std::vector<char> hit(static_cast<std::size_t>(replicas));
  const Rect B = box(L);
  parallel_for(hit.size(), [&](std::size_t r) {
    const auto env = covering_env(B, rho, q, hash_keys(seed, {r, 0}));
    const env::OccupancyGrid grid(env, B.x0, B.x1, B.n0, B.n1);
    hit[r] = bad_event(grid, walker::UniformField(hash_keys(seed, {r, 1})), w, L, v);
  });
  PkEstimate e;
  e.L = L;
  e.v = v;
  e.replicas = replicas;
  for (char h : hit) e.hits += h;
  const auto ci = stat::wilson_interval(e.hits, replicas);
  e.p_hat = ci.estimate;
  e.ci_lo = ci.lo;
  e.ci_hi = ci.hi;
  return e;
}

PkEstimate pk_estimate(const ScaleLadder& lad, int k, double q, const walker::WalkParams& w, int replicas,
                       std::uint64_t seed, double max_site_steps) {
  require(k >= 1 && k <= lad.k_max(), "k outside the ladder");
  return bad_event_monte_carlo(lad.L_native(k), lad.v_k[static_cast<std::size_t>(k)],
                               lad.rho[static_cast<std::size_t>(k)], q, w, replicas, seed, max_site_steps);
}

BoxRun simulate_box_run(const ScaleLadder& lad, int k, double rho, double q, const walker::WalkParams& w,
                        std::uint64_t seed, double max_site_steps) {
  require(k >= 1 && k < lad.k_max(), "k and k+1 must both lie in the ladder");
  w.validate();
  BoxRun run;
  run.k = k;
  run.Lk = lad.L_native(k);
  run.Lk1 = lad.L_native(k + 1);
  run.vk = lad.v_k[static_cast<std::size_t>(k)];
  run.vk1 = lad.v_k[static_cast<std::size_t>(k) + 1];
  const auto M = box_indices(run.Lk, run.Lk1);
  run.boxes = M.size();
  Rect hull = box(run.Lk1);
  for (const auto& m : M) {
    const Rect b = box(run.Lk, m);
    hull = {std::min(hull.x0, b.x0), std::max(hull.x1, b.x1), std::min(hull.n0, b.n0), std::max(hull.n1, b.n1)};
  }
  const double cost = static_cast<double>(hull.sites()) + static_cast<double>(M.size()) * box_cost(run.Lk) +
                      box_cost(run.Lk1);
  guard(cost, max_site_steps);
  const auto env = covering_env(hull, rho, q, hash_keys(seed, {0}));
  const env::OccupancyGrid grid(env, hull.x0, hull.x1, hull.n0, hull.n1);
  const walker::UniformField U(hash_keys(seed, {1}));
  std::vector<char> slow(M.size());
  parallel_for(M.size(), [&](std::size_t i) { slow[i] = bad_event(grid, U, w, run.Lk, run.vk, M[i]); });
  for (std::size_t i = 0; i < M.size(); ++i)
    if (slow[i]) run.slow.push_back(M[i]);
  run.big = min_displacement(grid, U, w, 0, 0, run.Lk1, run.Lk1);
  run.big_bad = static_cast<double>(run.big.value) < run.vk1 * static_cast<double>(run.Lk1);
  const auto path = walker::run_walk(grid, U, w, {run.big.start, 0}, run.Lk1);
  for (std::int64_t j = 0; j * run.Lk < run.Lk1; ++j) {
    const std::int64_t x = path.x[static_cast<std::size_t>(j * run.Lk)];
    const std::int64_t x1 = path.x[static_cast<std::size_t>((j + 1) * run.Lk)];
    run.layers.push_back({{floor_div(x, run.Lk), j}, x1 - x});
  }
  return run;
}

SlowBoxVerdict three_slow_boxes_check(const ScaleLadder& lad, int k, const BoxRun& run) {
  if (!k2large_holds(lad, k))
    throw PreconditionError("the scale inequality fails at k = " + std::to_string(k) +
                            "; the three-slow-boxes claim is not asserted there");
  SlowBoxVerdict v;
  std::vector<std::int64_t> s;
  for (const auto& m : run.slow) s.push_back(m.s);
  std::sort(s.begin(), s.end());
  v.distinct_layers = static_cast<int>(std::unique(s.begin(), s.end()) - s.begin());
  v.vacuous = !run.big_bad;
  v.holds = v.vacuous || v.distinct_layers >= 3;
  for (const auto& l : run.layers) {
    if (static_cast<double>(l.displacement) >= run.vk * static_cast<double>(run.Lk)) continue;
    const bool in_slow = std::find(run.slow.begin(), run.slow.end(), l.m) != run.slow.end();
    v.layers_consistent = v.layers_consistent && in_slow;
  }
  return v;
}

DisplacementReplay replay_layers(const ScaleLadder& lad, int k, const std::vector<std::int64_t>& disp) {
  require(k >= 1 && k < lad.k_max(), "k and k+1 must both lie in the ladder");
  const std::int64_t Lk = lad.L_native(k), Lk1 = lad.L_native(k + 1);
  const double vk = lad.v_k[static_cast<std::size_t>(k)], vk1 = lad.v_k[static_cast<std::size_t>(k) + 1];
  require(static_cast<std::int64_t>(disp.size()) * Lk == Lk1, "one displacement per layer is required");
  DisplacementReplay r;
  for (std::int64_t d : disp) {
    require(std::abs(d) <= Lk, "a layer displacement cannot exceed L_k in size");
    r.total += d;
    r.slow_layers += static_cast<double>(d) < vk * static_cast<double>(Lk);
  }
  const auto layers = static_cast<double>(disp.size());
  r.lower_bound = -static_cast<double>(r.slow_layers) * Lk + vk * Lk * (layers - r.slow_layers);
  r.big_bad = static_cast<double>(r.total) < vk1 * static_cast<double>(Lk1);
  return r;
}

TailSum tail_sum_check(double beta, double a, std::optional<std::int64_t> cutoff) {
  require(beta >= 0.0, "beta must be nonnegative");
  TailSum t;
  t.beta = beta;
  t.a = a;
  t.alpha0 = std::exp((beta + 1.0) * (beta + 1.0));
  if (a < t.alpha0)
    throw PreconditionError("a must be at least alpha0 = e^{(beta+1)^2} = " + std::to_string(t.alpha0));
  auto logf = [&](double u) { return (beta + 1.0) * u - std::pow(u, 1.5); };  // x = e^u, dx = x du
  auto integral_from = [&](double x) {
    boost::math::quadrature::exp_sinh<double> q;
    const double u0 = std::log(x);
    return q.integrate([&](double s) { return std::exp(logf(u0 + s)); }, 0.0, std::numeric_limits<double>::infinity());
  };
  auto term = [&](double l) {
    const double u = std::log(l);
    return std::exp(beta * u - std::pow(u, 1.5));
  };
  // terms are decreasing beyond e^{(2 beta / 3)^2}, so the integral bounds the neglected tail
  const auto first = static_cast<std::int64_t>(std::floor(a)) + 1;
  const double mono = std::exp(std::pow(2.0 * beta / 3.0, 2.0));
  auto sum_to = [&](std::int64_t c) {
    double s = 0.0;
    for (std::int64_t l = c; l >= first; --l) s += term(static_cast<double>(l));  // small terms first
    return s;
  };
  if (cutoff) {
    require(*cutoff >= first, "cutoff must exceed a");
    t.cutoff = *cutoff;
    t.lhs = sum_to(t.cutoff);
  } else {
    std::int64_t c = std::max<std::int64_t>(first, static_cast<std::int64_t>(std::ceil(mono)) + 1);
    for (;;) {
      t.lhs = sum_to(c);
      if (integral_from(static_cast<double>(c)) < 1e-13 * t.lhs || c > (std::int64_t{1} << 40)) break;
      c *= 4;
    }
    t.cutoff = c;
  }
  t.remainder = static_cast<double>(t.cutoff) >= mono ? integral_from(static_cast<double>(t.cutoff))
                                                      : std::numeric_limits<double>::infinity();
  t.remainder_certified = t.remainder < 1e-12 * t.lhs;
  t.integral = integral_from(t.alpha0);
  t.D = std::max(2.0 * t.integral, 4.0 / (beta + 1.0));
  t.rhs = t.D * std::exp((beta + 1.0) * std::log(a) - std::pow(std::log(a), 1.5));
  t.holds = t.lhs + t.remainder <= t.rhs;
  return t;
}

}  // namespace rwdre::renorm
