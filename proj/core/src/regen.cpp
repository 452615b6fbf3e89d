#include "rwdre/regen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rwdre/error.hpp"
#include "rwdre/parallel.hpp"

namespace rwdre::regen {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double phi(std::int64_t x, std::int64_t n, double v) { return static_cast<double>(x) - v * static_cast<double>(n); }

int step_value(const env::BlockWords& w, int j) {
  if (!((w.move >> j) & 1ULL)) return 0;
  return ((w.dir >> j) & 1ULL) ? 1 : -1;
}

// Bisection for the positive root of f on (0, inf) given f < 0 just right of 0.
template <class F>
double positive_root(F f) {
  double lo = 0.0, hi = 1e-3;
  while (f(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e4) return kInf;
  }
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return lo;  // lower end keeps e^{-theta d} conservative
}

// Step-level access to one particle's two-sided path with a one-block word cache.
class Scanner {
 public:
  Scanner(const env::Environment& env, env::ParticleKeys k) : env_(env), k_(k) {}

  // pos(t+1) - pos(t)
  int step_fwd(std::int64_t t) {
    if (t >= 0) return step_value(words(false, t / env::kBlock), static_cast<int>(t % env::kBlock));
    const std::int64_t j = -t - 1;
    return -step_value(words(true, j / env::kBlock), static_cast<int>(j % env::kBlock));
  }
  // pos(t-1) - pos(t)
  int step_bwd(std::int64_t t) {
    if (t >= 1) {
      const std::int64_t j = t - 1;
      return -step_value(words(false, j / env::kBlock), static_cast<int>(j % env::kBlock));
    }
    const std::int64_t j = -t;
    return step_value(words(true, j / env::kBlock), static_cast<int>(j % env::kBlock));
  }

  struct Span {
    int lo, hi, end;  // relative to pos(t)
  };
  // positions on [t, t+64], t a multiple of 64
  Span span_fwd(std::int64_t t) {
    if (t >= 0) {
      const auto e = env::block_extremes(words(false, t / env::kBlock));
      return {e.min_prefix, e.max_prefix, e.sum};
    }
    const auto e = env::block_extremes(words(true, -t / env::kBlock - 1));
    return {e.min_prefix - e.sum, e.max_prefix - e.sum, -e.sum};
  }
  // positions on [t-64, t], t a multiple of 64
  Span span_bwd(std::int64_t t) {
    if (t <= 0) {
      const auto e = env::block_extremes(words(true, -t / env::kBlock));
      return {e.min_prefix, e.max_prefix, e.sum};
    }
    const auto e = env::block_extremes(words(false, t / env::kBlock - 1));
    return {e.min_prefix - e.sum, e.max_prefix - e.sum, -e.sum};
  }

 private:
  const env::BlockWords& words(bool back, std::int64_t b) {
    if (!valid_ || back != back_ || b != b_) {
      w_ = back ? env_.backward_block(k_.bwd, b) : env_.forward_block(k_.fwd, b);
      back_ = back;
      b_ = b;
      valid_ = true;
    }
    return w_;
  }
  const env::Environment& env_;
  env::ParticleKeys k_;
  env::BlockWords w_;
  bool back_ = false;
  std::int64_t b_ = 0;
  bool valid_ = false;
};

struct Line {
  std::int64_t x0;
  std::int64_t n0;
  double v;
  double gap(std::int64_t t, std::int64_t pos) const {
    return static_cast<double>(pos - x0) - v * static_cast<double>(t - n0);
  }
};

double bound_given_theta(double theta, double v, double d) {
  if (d <= 0.0) return 1.0;
  if (!std::isfinite(theta)) return 0.0;
  return std::min({1.0, std::exp(-theta * d), std::exp(-d * v) / std::expm1(v * v / 2.0)});
}

struct ScanCtx {
  double theta;
  double v;
  double stop_gap;
  std::int64_t t_min;
  std::int64_t t_max;
  double bound(double d) const { return bound_given_theta(theta, v, d); }
};

struct Reach {
  bool hit = false;
  double residual = 0.0;
};

// exists t in [t0, t_max] with gap(t) >= level
Reach reach_up(Scanner& sc, const Line& L, const ScanCtx& c, std::int64_t t, std::int64_t p, double level) {
  for (;;) {
    const double g = L.gap(t, p);
    if (g >= level - kConeEps) return {true, 0.0};
    if (level - g >= c.stop_gap || t >= c.t_max) return {false, c.bound(level - g)};
    if (t % env::kBlock == 0 && t + env::kBlock <= c.t_max) {
      const auto s = sc.span_fwd(t);
      if (L.gap(t, p + s.hi) < level - kConeEps) {
        p += s.end;
        t += env::kBlock;
        continue;
      }
    }
    p += sc.step_fwd(t);
    ++t;
  }
}

// exists t in [t_min, t0] with gap(t) < level
Reach reach_down(Scanner& sc, const Line& L, const ScanCtx& c, std::int64_t t, std::int64_t p, double level) {
  for (;;) {
    const double g = L.gap(t, p);
    if (g < level - kConeEps) return {true, 0.0};
    if (g - level >= c.stop_gap || t <= c.t_min) return {false, c.bound(g - level)};
    if (t % env::kBlock == 0 && t - env::kBlock >= c.t_min) {
      const auto s = sc.span_bwd(t);
      if (L.gap(t, p + s.lo) >= level - kConeEps) {
        p += s.end;
        t -= env::kBlock;
        continue;
      }
    }
    p += sc.step_bwd(t);
    --t;
  }
}

struct Budget {
  std::int64_t M = 1;
  double outside = 0.0;
  double eps_p = 0.0;
  ScanCtx ctx{};
};

Budget make_budget(const env::Environment& env, double v, double tol, std::int64_t min_M = 1,
                   double level_shift = 0.0) {
  require(v > 0.0 && v < 1.0, "v_bar must lie in (0,1)");
  require(tol > 0.0 && tol < 1.0, "cert_tol must lie in (0,1)");
  Budget b;
  const double rho = env.rho(), q = env.q();
  b.M = std::max<std::int64_t>(1, min_M);
  const double theta = crossing_theta(q, v);
  auto outside = [&](std::int64_t M) {
    if (rho == 0.0 || !std::isfinite(theta)) return 0.0;
    // level_shift raises the relevant line; only the Lundberg sum is shifted
    const double d0 = static_cast<double>(M + 1);
    const double lund = std::exp(theta * (level_shift - d0)) / -std::expm1(-theta);
    if (level_shift > 0.0) return 2.0 * rho * lund;
    return 2.0 * rho * std::min(lund, std::exp(-v * d0) / (-std::expm1(-v) * std::expm1(v * v / 2.0)));
  };
  while (outside(b.M) > tol / 10.0 && b.M < 100000) ++b.M;
  b.outside = outside(b.M);
  const double n_exp = rho * (2.0 * b.M + 1.0) + 1.0;
  b.eps_p = tol / (20.0 * n_exp);
  // smallest gap whose crossing bound is below eps_p
  const double le = std::log(1.0 / b.eps_p);
  double d = (le - std::log(std::expm1(v * v / 2.0))) / v;
  if (std::isfinite(theta)) d = std::min(d, le / theta);
  b.ctx = {theta, v, std::max(d, 1.0), env.t_min(), env.t_max()};
  return b;
}

struct Member {
  env::ParticleKeys keys;
  std::int64_t pos;  // at y.n
  std::int64_t best = -1;
  double best_res = 0.0;
  bool in_local = false;
};

// Forward scan for L_w = max_{m >= n} min(m - n, floor(gap(m)/(1 - v))).
void longest_link(Scanner& sc, const Line& L, const ScanCtx& c, std::int64_t n, Member& m) {
  const double slope = 1.0 - L.v;
  std::int64_t t = n, p = m.pos;
  std::int64_t best = -1;
  for (;;) {
    const double g = L.gap(t, p);
    const auto cand = std::min<std::int64_t>(t - n, static_cast<std::int64_t>(std::floor((g + kConeEps) / slope)));
    best = std::max(best, cand);
    const double level = static_cast<double>(best + 1) * slope;
    if (level - g >= c.stop_gap || t >= c.t_max) {
      m.best = best;
      m.best_res = c.bound(level - g);
      return;
    }
    if (t % env::kBlock == 0 && t + env::kBlock <= c.t_max) {
      const auto s = sc.span_fwd(t);
      if (L.gap(t, p + s.hi) < level - kConeEps) {
        p += s.end;
        t += env::kBlock;
        continue;
      }
    }
    p += sc.step_fwd(t);
    ++t;
  }
}

struct Influence {
  InfluenceResult h;
  InfluenceResult hT;
};

Influence analyze(const env::Environment& env, const env::WalkCursor& probe, Point y, double v, double tol,
                  std::int64_t a) {
  const Budget b = make_budget(env, v, tol);
  const Line L{y.x, y.n, v};
  double res_common = b.outside;
  std::vector<Member> members;
  const auto near = probe.near(y.x, y.n, b.M);
  for (const auto& p : near) {
    Scanner sc(env, p.keys);
    const double g0 = static_cast<double>(p.position - y.x);
    const Reach r = g0 >= -kConeEps ? reach_down(sc, L, b.ctx, y.n, p.position, 0.0)
                                    : reach_up(sc, L, b.ctx, y.n, p.position, 0.0);
    if (!r.hit) {
      res_common += r.residual;
      continue;
    }
    Member m{p.keys, p.position};
    longest_link(sc, L, b.ctx, y.n, m);
    members.push_back(m);
  }
  Influence out;
  out.h.residual = res_common;
  out.hT.residual = res_common;
  std::int64_t hbest = -1, tbest = -1;
  for (auto& m : members) {
    out.h.residual += m.best_res;
    hbest = std::max(hbest, m.best);
    if (a >= 0) {
      Scanner sc(env, m.keys);
      const Reach r = reach_down(sc, L, b.ctx, y.n, m.pos, -static_cast<double>(a));
      if (r.hit) continue;
      out.hT.residual += r.residual + m.best_res;
      ++out.hT.members;
      tbest = std::max(tbest, m.best);
    }
  }
  out.h.members = static_cast<int>(members.size());
  out.h.value = members.empty() ? 0 : hbest + 1;
  out.h.certified = out.h.residual <= tol;
  out.hT.value = out.hT.members == 0 ? 0 : tbest + 1;
  out.hT.certified = out.hT.residual <= tol;
  return out;
}

// omega(W^angle_y cap W^x_{y+(s,s)}) = 0 with its residual
std::pair<Tri, double> third_condition(const env::Environment& env, const env::WalkCursor& probe, Point y, double v,
                                       std::int64_t s, double tol) {
  const double L3 = static_cast<double>(s) * (1.0 - v);
  const Budget b = make_budget(env, v, tol, 2 * s + 1, L3);
  const Line L{y.x, y.n, v};
  const std::int64_t n3 = y.n + s;
  double res = b.outside;
  bool member = false;
  ScanCtx ctx = b.ctx;
  for (const auto& p : probe.near(y.x, y.n, b.M)) {
    if (static_cast<double>(p.position - y.x) < -kConeEps) continue;  // in the down-cone at y.n
    Scanner sc(env, p.keys);
    const Reach past = reach_down(sc, L, ctx, y.n, p.position, 0.0);
    if (past.hit) continue;
    // walk to n3, checking the window (y.n, n3] for a dip below L3
    std::int64_t pos = p.position;
    bool below = L.gap(y.n, pos) < L3 - kConeEps;
    for (std::int64_t t = y.n; t < n3 && t < ctx.t_max; ++t) {
      pos += sc.step_fwd(t);
      below = below || L.gap(t + 1, pos) < L3 - kConeEps;
    }
    double r = past.residual;
    if (n3 > ctx.t_max) {
      res += 1.0;
      continue;
    }
    if (!below) {
      Scanner sb(env, p.keys);
      const Reach older = reach_down(sb, L, ctx, y.n, p.position, L3);
      below = older.hit;
      if (!below) r += older.residual;
    }
    if (!below) {
      res += r;
      continue;
    }
    const Reach fut = reach_up(sc, L, ctx, n3, pos, L3);
    if (fut.hit) {
      member = true;
      res += r;
    } else {
      res += r + fut.residual;
    }
  }
  if (res > tol) return {Tri::Undetermined, res};
  return {member ? Tri::False : Tri::True, res};
}

class Walk {
 public:
  Walk(const env::Occupancy& occ, const walker::UniformField& U, const walker::WalkParams& w, Point start)
      : occ_(occ), U_(U), w_(w), start_(start), x_{start.x} {}
  void ensure(std::int64_t len) {
    while (static_cast<std::int64_t>(x_.size()) <= len) {
      const Point y{x_.back(), start_.n + static_cast<std::int64_t>(x_.size()) - 1};
      x_.push_back(walker::step(occ_, U_, w_, y).x);
    }
  }
  std::int64_t x(std::int64_t i) const { return x_[static_cast<std::size_t>(i)]; }
  Point start() const { return start_; }

 private:
  const env::Occupancy& occ_;
  const walker::UniformField& U_;
  walker::WalkParams w_;
  Point start_;
  std::vector<std::int64_t> x_;
};

RegenReport search(const env::Environment& env, Walk& walk, const env::WalkCursor& probe,
                   const walker::WalkParams& w, const RegenConfig& cfg, std::int64_t b, std::int64_t horizon) {
  const double v = cfg.v_star / 3.0;
  const double tol = cfg.cert_tol;
  const double pmin = std::min(w.p_circ, w.p_bullet);
  RegenReport rep;
  if (horizon <= 0) return rep;
  std::int64_t H = std::min<std::int64_t>(std::max<std::int64_t>(1, cfg.initial_chunk), horizon);
  const std::int64_t x0 = walk.x(b);
  auto ph = [&](std::int64_t i) { return phi(walk.x(b + i) - x0, i, v); };
  std::vector<Record> recs;
  std::int64_t k_next = 1, i_scan = 0;
  std::size_t next = 0;
  std::optional<CrossResult> cand;
  std::vector<double> smin;
  for (;;) {
    walk.ensure(b + H);
    for (; i_scan <= H; ++i_scan)
      while (ph(i_scan) >= (1.0 - v) * static_cast<double>(k_next) - kConeEps) recs.push_back({k_next++, i_scan});
    smin.assign(static_cast<std::size_t>(H + 1), 0.0);
    smin[static_cast<std::size_t>(H)] = ph(H);
    for (std::int64_t i = H - 1; i >= 0; --i)
      smin[static_cast<std::size_t>(i)] = std::min(ph(i), smin[static_cast<std::size_t>(i + 1)]);
    bool extend = false;
    while (next < recs.size()) {
      const Record r = recs[next];
      if (rep.records.size() <= next) {
        RecordInfo info;
        info.k = r.k;
        info.R = r.R;
        info.y = {walk.x(b + r.R), walk.start().n + b + r.R};
        rep.records.push_back(info);
      }
      RecordInfo& info = rep.records[next];
      const double py = ph(r.R);
      if (smin[static_cast<std::size_t>(r.R)] < py - kConeEps) {
        info.confined = Tri::False;
        cand.reset();
        ++next;
        continue;
      }
      const double rA = confinement_bound(pmin, v, ph(H) - py);
      if (!cand) cand = cross_empty(env, probe, info.y, v, tol);
      if (!cand->empty) {
        info.cross_empty = Tri::False;
        cand.reset();
        ++next;
        continue;
      }
      info.residual = cand->residual + rA;
      if (info.residual <= tol) {
        info.cross_empty = Tri::True;
        info.confined = Tri::True;
        rep.found = true;
        rep.certified = true;
      } else if (H < horizon) {
        extend = true;
        break;
      } else {
        rep.found = true;
        rep.certified = false;
      }
      rep.index = r.k;
      rep.tau = r.R;
      rep.x_tau = walk.x(b + r.R) - x0;
      rep.residual = info.residual;
      rep.horizon_used = H;
      return rep;
    }
    if (!extend && H >= horizon) break;
    H = std::min<std::int64_t>(2 * H, horizon);
  }
  rep.horizon_used = H;
  return rep;
}

void fill_path(RegenReport& rep, const Walk& walk, std::int64_t b) {
  rep.path.start = {walk.x(b), walk.start().n + b};
  rep.path.x.clear();
  for (std::int64_t i = 0; i <= rep.horizon_used; ++i) rep.path.x.push_back(walk.x(b + i));
}

}  // namespace

// ---------------------------------------------------------------------------

bool in_up_cone(Point base, Point y, double v) {
  const std::int64_t dn = y.n - base.n;
  return dn >= 0 && phi(y.x - base.x, dn, v) >= -kConeEps;
}

bool in_down_cone(Point base, Point y, double v) {
  const std::int64_t dn = y.n - base.n;
  return dn <= 0 && phi(y.x - base.x, dn, v) < -kConeEps;
}

std::int64_t kappa(Point y, double v) {
  require(y.n >= 0, "kappa needs n >= 0");
  return static_cast<std::int64_t>(std::floor((phi(y.x, y.n, v) + kConeEps) / (1.0 - v)));
}

std::vector<Record> record_times(const walker::Path& path, double v) {
  std::vector<Record> out;
  std::int64_t k = 1;
  for (std::int64_t i = 0; i <= path.steps(); ++i)
    while (phi(path.x[static_cast<std::size_t>(i)] - path.x[0], i, v) >= (1.0 - v) * static_cast<double>(k) - kConeEps)
      out.push_back({k++, i});
  return out;
}

Derived derive(const RegenConfig& cfg, const walker::WalkParams& w) {
  w.validate();
  require(cfg.v_star > 0.0 && cfg.v_star <= 1.0, "v_star must lie in (0,1]");
  require(cfg.cert_tol > 0.0 && cfg.cert_tol < 1.0, "cert_tol must lie in (0,1)");
  const double pmin = std::min(w.p_circ, w.p_bullet);
  require(pmin > 0.0 && pmin < 1.0, "p_circ ^ p_bullet must lie in (0,1)");
  Derived d;
  d.v_bar = cfg.v_star / 3.0;
  d.delta = 1.0 / (4.0 * std::log(1.0 / pmin));
  d.c2_hat = cfg.c2_hat ? *cfg.c2_hat : d.v_bar / 2.0;
  require(d.c2_hat > 0.0, "c2_hat must be positive");
  d.epsilon = std::min(d.c2_hat * d.delta, 1.0) / 4.0;
  const double tmin = std::exp(1.0 / d.delta);
  if (!(cfg.T >= tmin))
    throw ParameterError("T must be at least e^{1/delta} = " + std::to_string(tmin) + " so that T'' >= 1");
  d.T_prime = static_cast<std::int64_t>(std::floor(std::pow(cfg.T, d.epsilon)));
  d.T_dprime = static_cast<std::int64_t>(std::floor(d.delta * std::log(cfg.T)));
  require(d.T_prime >= 1 && d.T_dprime >= 1, "derived horizons T' and T'' must be positive");
  return d;
}

double crossing_theta(double q, double v) {
  if (q >= 1.0) return kInf;
  thread_local double last_q = -1.0, last_v = -1.0, last_theta = 0.0;
  if (q == last_q && v == last_v) return last_theta;
  last_q = q;
  last_v = v;
  return last_theta = positive_root([&](double th) {
    // log(q + (1-q) cosh th) - th v, written to avoid overflow
    const double lc = th + std::log1p(std::exp(-2.0 * th)) - std::log(2.0);
    const double a = std::log(q) , b = std::log1p(-q) + lc;
    const double m = std::max(a, b);
    const double l = q > 0.0 ? m + std::log(std::exp(a - m) + std::exp(b - m)) : b;
    return l - th * v;
  });
}

double crossing_bound(double q, double v, double d) {
  if (d <= 0.0) return 1.0;
  return bound_given_theta(crossing_theta(q, v), v, d);
}

double confinement_theta(double p, double v) {
  if (p >= 1.0) return kInf;
  if (2.0 * p - 1.0 <= v) return 0.0;
  return positive_root([&](double th) {
    return std::log(p * std::exp(-th * (1.0 - v)) + (1.0 - p) * std::exp(th * (1.0 + v)));
  });
}

double confinement_bound(double p, double v, double margin) {
  if (margin < 0.0) return 1.0;
  const double th = confinement_theta(p, v);
  if (th == 0.0) return 1.0;
  if (!std::isfinite(th)) return 0.0;
  return std::min(1.0, std::exp(-th * margin));
}

double outside_bound(double rho, double q, double v, std::int64_t M) {
  if (rho <= 0.0) return 0.0;
  const double th = crossing_theta(q, v);
  if (!std::isfinite(th)) return 0.0;
  const double d0 = static_cast<double>(M + 1);
  const double lund = std::exp(-th * d0) / -std::expm1(-th);
  const double azuma = std::exp(-v * d0) / (-std::expm1(-v) * std::expm1(v * v / 2.0));
  return 2.0 * rho * std::min(lund, azuma);
}

CrossResult cross_empty(const env::Environment& env, const env::WalkCursor& probe, Point y, double v, double tol) {
  const Budget b = make_budget(env, v, tol);
  const Line L{y.x, y.n, v};
  auto near = probe.near(y.x, y.n, b.M);
  std::sort(near.begin(), near.end(),
            [&](const auto& a, const auto& c) { return std::abs(a.position - y.x) < std::abs(c.position - y.x); });
  CrossResult out;
  out.residual = b.outside;
  for (const auto& p : near) {
    ++out.examined;
    Scanner sc(env, p.keys);
    const double g0 = static_cast<double>(p.position - y.x);
    const Reach r = g0 >= -kConeEps ? reach_down(sc, L, b.ctx, y.n, p.position, 0.0)
                                    : reach_up(sc, L, b.ctx, y.n, p.position, 0.0);
    if (r.hit) {
      out.empty = false;
      out.residual = 0.0;
      return out;
    }
    out.residual += r.residual;
  }
  return out;
}

InfluenceResult influence_field(const env::Environment& env, const env::WalkCursor& probe, Point y, double v,
                                double tol) {
  return analyze(env, probe, y, v, tol, -1).h;
}

InfluenceResult influence_field(const env::Environment& env, Point y, double v, double tol) {
  const env::WalkCursor probe(env);
  return influence_field(env, probe, y, v, tol);
}

InfluenceResult local_influence_field(const env::Environment& env, const env::WalkCursor& probe, Point y,
                                      const Derived& d, double tol) {
  const auto a = static_cast<std::int64_t>(std::floor((1.0 - d.v_bar) * static_cast<double>(d.T_prime)));
  return analyze(env, probe, y, d.v_bar, tol, a).hT;
}

InfluenceResult local_influence_field(const env::Environment& env, Point y, const Derived& d, double tol) {
  const env::WalkCursor probe(env);
  return local_influence_field(env, probe, y, d, tol);
}

Tri GoodRecord::good() const {
  if (c1 == Tri::False || c2 == Tri::False || c3 == Tri::False || c4 == Tri::False) return Tri::False;
  if (c1 == Tri::True && c2 == Tri::True && c3 == Tri::True && c4 == Tri::True) return Tri::True;
  return Tri::Undetermined;
}

namespace {

GoodRecord flags_at(const env::Environment& env, const env::WalkCursor& probe, const walker::UniformField& U,
                    const walker::WalkParams& w, const walker::Path& path, const std::vector<Record>& recs,
                    std::size_t i, const Derived& d, double tol) {
  GoodRecord g;
  const Point y = path.at(recs[i].R);
  const auto hT = local_influence_field(env, probe, y, d, tol);
  g.c1 = !hT.certified ? Tri::Undetermined : (hT.value <= d.T_dprime ? Tri::True : Tri::False);
  const double pmin = std::min(w.p_circ, w.p_bullet);
  g.c2 = Tri::True;
  for (std::int64_t l = 0; l < d.T_dprime; ++l)
    if (!(U(y.x + l, y.n + l) <= pmin)) g.c2 = Tri::False;
  g.c3 = third_condition(env, probe, y, d.v_bar, d.T_dprime, tol).first;
  if (d.T_prime <= d.T_dprime) {
    g.c4 = Tri::True;
  } else if (i + static_cast<std::size_t>(d.T_prime) >= recs.size()) {
    g.c4 = Tri::Undetermined;
  } else {
    const std::int64_t r1 = recs[i + static_cast<std::size_t>(d.T_dprime)].R;
    const std::int64_t r2 = recs[i + static_cast<std::size_t>(d.T_prime)].R;
    const Point base = path.at(r1);
    g.c4 = Tri::True;
    for (std::int64_t j = r1 + 1; j <= r2; ++j)
      if (!in_up_cone(base, path.at(j), d.v_bar)) g.c4 = Tri::False;
  }
  return g;
}

}  // namespace

std::vector<GoodRecord> good_record_flags(const env::Environment& env, const walker::UniformField& U,
                                          const walker::WalkParams& w, const walker::Path& path, const Derived& d,
                                          double tol) {
  const auto recs = record_times(path, d.v_bar);
  const env::WalkCursor probe(env);
  std::vector<GoodRecord> out;
  out.reserve(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) out.push_back(flags_at(env, probe, U, w, path, recs, i, d, tol));
  return out;
}

RegenReport regeneration_time(const env::Environment& env, const walker::UniformField& U,
                              const walker::WalkParams& w, const RegenConfig& cfg, Point y0, std::int64_t horizon) {
  w.validate();
  require(cfg.v_star > 0.0 && cfg.v_star <= 1.0, "v_star must lie in (0,1]");
  require(horizon >= 0, "horizon must be nonnegative");
  std::optional<Derived> d;
  if (cfg.details) d = derive(cfg, w);
  const env::WalkCursor cur(env), probe(env);
  Walk walk(cur, U, w, y0);
  RegenReport rep = search(env, walk, probe, w, cfg, 0, horizon);
  walk.ensure(rep.horizon_used);
  fill_path(rep, walk, 0);
  if (d) {
    const auto recs = record_times(rep.path, d->v_bar);
    const env::WalkCursor dprobe(env);
    for (std::size_t i = 0; i < rep.records.size(); ++i) {
      auto& info = rep.records[i];
      const auto both = analyze(env, dprobe, info.y, d->v_bar, cfg.cert_tol,
                                static_cast<std::int64_t>(std::floor((1.0 - d->v_bar) * d->T_prime)));
      info.h = both.h;
      info.hT = both.hT;
      info.good = flags_at(env, dprobe, U, w, rep.path, recs, i, *d, cfg.cert_tol);
    }
  }
  return rep;
}

RegenSequence regen_sequence(const env::Environment& env, const walker::UniformField& U, const walker::WalkParams& w,
                             const RegenConfig& cfg, Point y0, std::int64_t horizon, int count) {
  w.validate();
  require(count >= 0, "count must be nonnegative");
  const env::WalkCursor cur(env), probe(env);
  Walk walk(cur, U, w, y0);
  RegenSequence seq;
  seq.complete = true;
  std::int64_t b = 0;
  for (int c = 0; c < count; ++c) {
    const RegenReport rep = search(env, walk, probe, w, cfg, b, horizon);
    if (!rep.found) {
      seq.complete = false;
      break;
    }
    Segment s;
    s.dt = rep.tau;
    s.dx = rep.x_tau;
    b += rep.tau;
    s.tau = y0.n + b;
    s.x = walk.x(b);
    s.certified = rep.certified;
    s.residual = rep.residual;
    if (!rep.certified) seq.complete = false;
    seq.segments.push_back(s);
  }
  return seq;
}

env::EnvConfig regen_window(double rho, double q, std::int64_t total_steps, std::uint64_t seed) {
  require(total_steps >= 0, "total_steps must be nonnegative");
  env::EnvConfig c;
  c.rho = rho;
  c.q = q;
  c.x_min = -(2 * total_steps + 1024);
  c.x_max = 2 * total_steps + 1024;
  c.t_min = -4096;
  c.t_max = total_steps + 4096;
  c.seed = seed;
  return c;
}

stat::Ratio speed_from_increments(const std::vector<double>& dx, const std::vector<double>& dt) {
  return stat::ratio_estimate(dx, dt);
}

double sigma2_from_increments(const std::vector<double>& dx, const std::vector<double>& dt) {
  require(!dx.empty() && dx.size() == dt.size(), "increments must be nonempty and paired");
  const double v = speed_from_increments(dx, dt).value;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const double r = dx[i] - v * dt[i];
    num += r * r;
    den += dt[i];
  }
  return num / den;
}

AngleSample angle_rejection_sample(double rho, double q, const walker::WalkParams& w, const RegenConfig& cfg,
                                   std::int64_t horizon, std::uint64_t seed, int max_attempts) {
  const double v = cfg.v_star / 3.0;
  const double pmin = std::min(w.p_circ, w.p_bullet);
  for (int a = 0; a < max_attempts; ++a) {
    AngleSample s;
    s.attempts = a + 1;
    s.env_seed = hash_keys(seed, {static_cast<std::uint64_t>(a), 0});
    s.field_seed = hash_keys(seed, {static_cast<std::uint64_t>(a), 1});
    const env::Environment env(regen_window(rho, q, horizon, s.env_seed));
    const env::WalkCursor cur(env), probe(env);
    const auto cross = cross_empty(env, probe, {0, 0}, v, cfg.cert_tol);
    if (!cross.empty) continue;
    const walker::UniformField U(s.field_seed);
    const auto path = walker::run_walk(cur, U, w, {0, 0}, horizon);
    bool inside = true;
    for (std::int64_t i = 0; i <= horizon && inside; ++i) inside = phi(path.x[i], i, v) >= -kConeEps;
    if (!inside) continue;
    s.residual = cross.residual + confinement_bound(pmin, v, phi(path.x.back(), horizon, v));
    if (s.residual <= cfg.cert_tol) return s;
  }
  throw SimulationError("no cone-conditioned sample certified within " + std::to_string(max_attempts) + " attempts");
}

bool in_parallelogram(Point y, Point z, std::int64_t t, double v) {
  if (!in_up_cone(y, z, v)) return false;
  if (static_cast<double>(z.n - y.n) > static_cast<double>(t) / v + kConeEps) return false;
  const std::int64_t k = kappa(y, v) + t;
  // z in the k-th record cone
  const bool in_k = z.n >= 0 && phi(z.x, z.n, v) - (1.0 - v) * static_cast<double>(k) >= -kConeEps;
  return !in_k;
}

std::vector<Point> right_boundary(Point y, std::int64_t t, double v) {
  require(t >= 1 && y.n >= 0, "parallelogram needs t >= 1 and n >= 0");
  std::vector<Point> out;
  const auto nspan = static_cast<std::int64_t>(std::floor(static_cast<double>(t) / v)) + 1;
  const std::int64_t k = kappa(y, v) + t;
  for (std::int64_t n = y.n; n <= y.n + nspan; ++n) {
    const auto lo = y.x + static_cast<std::int64_t>(std::floor(v * static_cast<double>(n - y.n))) - 1;
    const auto hi = static_cast<std::int64_t>(std::ceil((1.0 - v) * static_cast<double>(k) + v * static_cast<double>(n))) + 2;
    for (std::int64_t x = lo; x <= hi; ++x)
      if (!in_parallelogram(y, {x, n}, t, v) && in_parallelogram(y, {x - 1, n}, t, v)) out.push_back({x, n});
  }
  return out;
}

bool exits_right(const env::Occupancy& occ, const walker::UniformField& U, const walker::WalkParams& w, Point y,
                 std::int64_t t, double v) {
  Point z = y;
  const auto cap = static_cast<std::int64_t>(std::floor(static_cast<double>(t) / v)) + 2;
  for (std::int64_t i = 0; i <= cap; ++i) {
    z = walker::step(occ, U, w, z);
    if (!in_parallelogram(y, z, t, v)) return in_parallelogram(y, {z.x - 1, z.n}, t, v);
  }
  throw SimulationError("walk did not leave the parallelogram");
}

ExitProbe parallelogram_exit_probe(double rho, double q, const walker::WalkParams& w, Point y, std::int64_t t,
                                   double v_star, int replicas, std::uint64_t seed) {
  require(t >= 4, "parallelogram probe needs t >= 4");
  require(replicas >= 1, "replicas must be positive");
  require(y.n >= 0, "parallelogram base needs n >= 0");
  const double v = v_star / 3.0;
  const auto S = static_cast<std::int64_t>(std::floor(static_cast<double>(t) / v)) + 4;
  std::vector<int> hit(static_cast<std::size_t>(replicas));
  parallel_for(static_cast<std::size_t>(replicas), [&](std::size_t r) {
    env::EnvConfig c;
    c.rho = rho;
    c.q = q;
    c.x_min = y.x - 2 * S - y.n - 8;
    c.x_max = y.x + 2 * S + y.n + 8;
    c.t_min = 0;
    c.t_max = y.n + S;
    c.seed = hash_keys(seed, {r, 0});
    const env::Environment env(c);
    const env::WalkCursor cur(env);
    hit[r] = exits_right(cur, walker::UniformField(hash_keys(seed, {r, 1})), w, y, t, v);
  });
  ExitProbe p;
  p.replicas = replicas;
  double k = 0;
  for (int h : hit) k += h;
  const auto ci = stat::wilson_interval(k, replicas);
  p.estimate = ci.estimate;
  p.lo = ci.lo;
  p.hi = ci.hi;
  p.positive = p.lo > 0.0;
  return p;
}

}  // namespace rwdre::regen
