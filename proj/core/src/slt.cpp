#include "rwdre/slt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "rwdre/error.hpp"
#include "rwdre/parallel.hpp"
#include "rwdre/rng.hpp"

namespace rwdre::slt {

namespace {

// poisson_inverse starts from e^{-mean}; larger means are split into independent parts
constexpr double kPoissonChunk = 400.0;

std::uint64_t poisson(double mean, Stream& st) {
  std::uint64_t k = 0;
  while (mean > kPoissonChunk) {
    k += poisson_inverse(kPoissonChunk, st.uniform());
    mean -= kPoissonChunk;
  }
  return k + poisson_inverse(mean, st.uniform());
}

}  // namespace

LabeledPointProcess::LabeledPointProcess(std::vector<std::int64_t> sigma, std::vector<double> mu, double height_cap,
                                         std::uint64_t seed)
    : sigma_(std::move(sigma)), mu_(std::move(mu)), seed_(seed) {
  require(sigma_.size() == mu_.size(), "sigma and mu must have the same length");
  require(height_cap >= 0.0 && std::isfinite(height_cap), "height cap must be finite and nonnegative");
  for (double w : mu_) require(w >= 0.0 && std::isfinite(w), "mu must be finite and nonnegative");
  heights_.assign(sigma_.size(), {});
  caps_.assign(sigma_.size(), 0.0);
  layers_.assign(sigma_.size(), 0);
  extend_all(height_cap);
}

double LabeledPointProcess::total_mass() const { return std::accumulate(mu_.begin(), mu_.end(), 0.0); }

double LabeledPointProcess::min_cap() const {
  return caps_.empty() ? 0.0 : *std::min_element(caps_.begin(), caps_.end());
}

void LabeledPointProcess::extend(std::size_t s, double h) {
  const double lo = caps_[s];
  if (!(h > lo)) return;
  Stream st(hash_keys(seed_, {as_key(sigma_[s]), layers_[s]++}));
  const std::uint64_t k = poisson(mu_[s] * (h - lo), st);
  std::vector<double> fresh(k);
  for (double& v : fresh) v = lo + (h - lo) * st.uniform_pos();
  std::sort(fresh.begin(), fresh.end());
  heights_[s].insert(heights_[s].end(), fresh.begin(), fresh.end());
  caps_[s] = h;
}

void LabeledPointProcess::extend_all(double h) {
  for (std::size_t s = 0; s < size(); ++s) extend(s, h);
}

std::size_t LabeledPointProcess::count_below(std::size_t s, double level) const {
  const auto& h = heights_[s];
  return static_cast<std::size_t>(std::lower_bound(h.begin(), h.end(), level) - h.begin());
}

std::size_t LabeledPointProcess::count() const {
  std::size_t c = 0;
  for (const auto& h : heights_) c += h.size();
  return c;
}

std::vector<LabeledPointProcess::Point> LabeledPointProcess::points() const {
  std::vector<Point> out;
  out.reserve(count());
  for (std::size_t s = 0; s < size(); ++s)
    for (double v : heights_[s]) out.push_back({sigma_[s], v});
  return out;
}

LabeledPointProcess sample_point_process(std::vector<std::int64_t> sigma, std::vector<double> mu, double height_cap,
                                         std::uint64_t seed) {
  LabeledPointProcess m(std::move(sigma), std::move(mu), height_cap, seed);
  if (m.size() > 0 && height_cap > 0.0 && !(m.total_mass() > 0.0))
    throw PreconditionError("mu(Sigma) must be positive");
  return m;
}

LabeledPointProcess sample_point_process(std::vector<std::int64_t> sigma, double height_cap, std::uint64_t seed) {
  std::vector<double> mu(sigma.size(), 1.0);
  return sample_point_process(std::move(sigma), std::move(mu), height_cap, seed);
}

Density kernel_density(const kernel::HeatKernel& k, std::int64_t x, std::int64_t sigma0, std::size_t sigma_size) {
  const std::int64_t lo = x - k.n();
  if (lo < sigma0 || x + k.n() >= sigma0 + static_cast<std::int64_t>(sigma_size))
    throw PreconditionError("kernel support leaves the site window");
  Density d;
  d.first = static_cast<std::size_t>(lo - sigma0);
  d.w.resize(2 * static_cast<std::size_t>(k.n()) + 1);
  for (int y = -k.n(); y <= k.n(); ++y) d.w[static_cast<std::size_t>(y + k.n())] = k(y);
  return d;
}

void check_density(const LabeledPointProcess& m, const Density& g) {
  if (g.first + g.w.size() > m.size()) throw PreconditionError("density support exceeds Sigma");
  double s = 0.0;
  for (std::size_t i = 0; i < g.w.size(); ++i) {
    if (!(g.w[i] >= 0.0) || !std::isfinite(g.w[i])) throw PreconditionError("density must be finite and nonnegative");
    s += g.w[i] * m.mu()[g.first + i];
  }
  if (std::fabs(s - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "density integrates to " << s << " against mu, not 1";
    throw PreconditionError(os.str());
  }
}

Sequencer::Sequencer(LabeledPointProcess m) : m_(std::move(m)) {
  slt_.G.assign(m_.size(), 0.0);
  next_free_.assign(m_.size(), 0);
}

Draw Sequencer::next(const Density& g) {
  check_density(m_, g);
  const std::size_t a = g.first, b = g.first + g.w.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (int attempt = 0;; ++attempt) {
    if (attempt > 256) throw SimulationError("no point caught after repeated extension of the height cap");
    double best = inf;
    std::size_t best_s = b;
    bool tie = false;
    for (std::size_t s = a; s < b; ++s) {
      const double w = g.w[s - a];
      if (w <= 0.0) continue;
      const auto& h = m_.heights_[s];
      const std::size_t f = next_free_[s];
      if (f >= h.size()) continue;
      const double r = std::max(0.0, (h[f] - slt_.G[s]) / w);
      if (r < best) {
        best = r;
        best_s = s;
        tie = false;
      } else if (r == best) {
        tie = true;
      }
    }
    // unrealized points at an exhausted site lie above its cap; they cannot win if the
    // cap is already past the candidate level
    bool valid = true;
    for (std::size_t s = a; s < b; ++s) {
      const double w = g.w[s - a];
      if (w <= 0.0 || m_.mu_[s] <= 0.0 || next_free_[s] < m_.heights_[s].size()) continue;
      const double room = m_.caps_[s] - slt_.G[s];
      if (room >= best * w) continue;
      valid = false;
      const double target =
          std::isfinite(best) ? slt_.G[s] + best * w : m_.caps_[s] + std::max(1.0, m_.caps_[s] - slt_.G[s]);
      m_.extend(s, std::max(target, m_.caps_[s] + 1.0 / 64.0));
    }
    if (!valid) continue;
    if (!std::isfinite(best)) throw SimulationError("density has no mass on sites with positive mu");
    for (std::size_t s = a; s < b; ++s) slt_.G[s] += best * g.w[s - a];
    Draw d;
    d.site = best_s;
    d.z = m_.sigma_[best_s];
    d.rank = next_free_[best_s]++;
    d.xi = best;
    d.tie = tie;
    if (tie) ++ties_;
    slt_.xi.push_back(best);
    slt_.consumed.emplace_back(d.site, d.rank);
    return d;
  }
}

LabeledPointProcess Sequencer::residual() const {
  LabeledPointProcess r = m_;
  for (std::size_t s = 0; s < r.size(); ++s) {
    const double G = slt_.G[s];
    std::vector<double> h;
    h.reserve(m_.heights_[s].size() - next_free_[s]);
    for (std::size_t i = next_free_[s]; i < m_.heights_[s].size(); ++i) h.push_back(std::max(0.0, m_.heights_[s][i] - G));
    r.heights_[s] = std::move(h);
    r.caps_[s] = std::max(0.0, m_.caps_[s] - G);
  }
  return r;
}

OneDraw simulate_one(const LabeledPointProcess& m, const Density& g) {
  Sequencer seq(m);
  OneDraw out;
  out.draw = seq.next(g);
  out.residual = seq.residual();
  return out;
}

Sequence simulate_sequence(const LabeledPointProcess& m, const std::vector<Density>& gs) {
  Sequencer seq(m);
  Sequence out;
  out.draws.reserve(gs.size());
  for (const auto& g : gs) out.draws.push_back(seq.next(g));
  out.slt = seq.soft_local_time();
  out.residual = seq.residual();
  out.ties = seq.ties();
  return out;
}

DominationReport domination_check(const std::vector<std::int64_t>& sigma, const std::vector<double>& mu,
                                  const std::vector<Density>& gs, double rho, std::size_t replicas,
                                  std::uint64_t seed) {
  require(rho > 0.0, "rho must be positive");
  require(replicas >= 2, "need at least two replicas");
  std::vector<unsigned char> lhs(replicas), rhs(replicas);
  parallel_for(replicas, [&](std::size_t r) {
    Sequencer seq(sample_point_process(sigma, mu, rho, hash_keys(seed, {r})));
    std::vector<std::size_t> hits(sigma.size(), 0);
    for (const auto& g : gs) ++hits[seq.next(g).site];
    bool dom = true, covered = true;
    for (std::size_t s = 0; s < sigma.size(); ++s) {
      if (hits[s] < seq.process().count_below(s, rho)) dom = false;
      if (seq.soft_local_time().G[s] < rho) covered = false;
    }
    lhs[r] = dom;
    rhs[r] = covered;
  });
  DominationReport rep;
  rep.replicas = replicas;
  std::vector<double> diff(replicas);
  double nl = 0, nr = 0;
  for (std::size_t r = 0; r < replicas; ++r) {
    nl += lhs[r];
    nr += rhs[r];
    diff[r] = static_cast<double>(lhs[r]) - static_cast<double>(rhs[r]);
    if (rhs[r] && !lhs[r]) ++rep.implication_violations;
  }
  const double N = static_cast<double>(replicas);
  rep.lhs_hat = nl / N;
  rep.rhs_hat = nr / N;
  rep.joint_se = stat::moments(diff).se();
  rep.holds = rep.lhs_hat >= rep.rhs_hat - 3.0 * rep.joint_se;
  return rep;
}

CouplingReport endpoint_coupling(const std::vector<std::int64_t>& starts, const kernel::Paving& paving,
                                 const std::vector<std::int64_t>& h_prime, const CouplingConfig& cfg) {
  require(cfg.rho > 0.0, "rho must be positive");
  require(cfg.rho_prime >= 0.0 && cfg.rho_prime <= cfg.rho, "need 0 <= rho' <= rho");
  require(cfg.n >= 1, "n must be >= 1");
  require(cfg.replicas >= 2, "need at least two replicas");
  require(!starts.empty() && !h_prime.empty(), "starts and H' must be nonempty");
  const int L = paving.L();
  const double n = cfg.n;
  if (n < cfg.n_factor * L * L) {
    std::ostringstream os;
    os << "n = " << cfg.n << " is below " << cfg.n_factor << " L^2 = " << cfg.n_factor * L * L;
    throw PreconditionError(os.str());
  }
  kernel::check_dense(paving, starts, cfg.rho);
  const auto& H = paving.target();
  for (std::int64_t z : h_prime) {
    const auto cnt = std::upper_bound(H.begin(), H.end(), z + cfg.n) - std::lower_bound(H.begin(), H.end(), z - cfg.n);
    if (cnt != 2 * cfg.n + 1) throw PreconditionError("H' must keep distance n from the complement of H");
  }

  const kernel::HeatKernel k = kernel::heat_kernel(cfg.q, cfg.n);
  const auto [smin, smax] = std::minmax_element(starts.begin(), starts.end());
  const auto [hmin, hmax] = std::minmax_element(h_prime.begin(), h_prime.end());
  const std::int64_t lo = std::min(*smin - cfg.n, *hmin), hi = std::max(*smax + cfg.n, *hmax);
  const auto width = static_cast<std::size_t>(hi - lo + 1);
  std::vector<std::int64_t> sigma(width);
  std::iota(sigma.begin(), sigma.end(), lo);
  std::vector<Density> gs;
  gs.reserve(starts.size());
  for (std::int64_t x : starts) gs.push_back(kernel_density(k, x, lo, width));

  CouplingReport rep;
  rep.replicas = cfg.replicas;
  rep.h_prime_size = h_prime.size();
  rep.center = h_prime[h_prime.size() / 2];
  const auto center_idx = static_cast<std::size_t>(rep.center - lo);

  std::vector<unsigned char> dom(cfg.replicas);
  std::vector<double> gc(cfg.replicas);
  std::vector<std::size_t> ties(cfg.replicas);
  const double cap = std::max(cfg.rho, cfg.rho_prime);
  parallel_for(cfg.replicas, [&](std::size_t r) {
    Sequencer seq(sample_point_process(sigma, cap, hash_keys(cfg.seed, {r})));
    std::vector<std::size_t> hits(width, 0);
    for (const auto& g : gs) ++hits[seq.next(g).site];
    bool ok = true;
    for (std::int64_t z : h_prime) {
      const auto s = static_cast<std::size_t>(z - lo);
      if (hits[s] < seq.process().count_below(s, cfg.rho_prime)) ok = false;
    }
    dom[r] = ok;
    gc[r] = seq.soft_local_time().G[center_idx];
    ties[r] = seq.ties();
  });
  const double succ = std::accumulate(dom.begin(), dom.end(), 0.0);
  rep.frequency = stat::wilson_interval(succ, static_cast<double>(cfg.replicas), 0.9973);
  rep.ties = std::accumulate(ties.begin(), ties.end(), std::size_t{0});
  const auto gm = stat::moments(gc);
  rep.mean_G_center = gm.mean;
  rep.mean_G_center_se = gm.se();

  const double sq = std::sqrt(n), ln = std::log(n);
  for (int x = -cfg.n; x <= cfg.n; ++x) rep.c_local = std::max(rep.c_local, k(x) * sq);
  double chern = 0.0;
  for (std::int64_t z : h_prime) {
    double mass = 0.0, logprod = 0.0;
    for (std::int64_t x : starts) {
      const double p = k(z - x);
      mass += p;
      logprod -= std::log1p(L * p);
    }
    if (z == rep.center) rep.expected_G_center = mass;
    rep.c_integration = std::max(rep.c_integration, (1.0 - mass / cfg.rho) * sq / (L * ln));
    chern += std::exp(cfg.rho_prime * L + logprod);
  }
  rep.integration_lower = cfg.rho * (1.0 - rep.c_integration * L * ln / sq);
  rep.exponent_constant = 2.0 * std::max(rep.c_integration, rep.c_local);
  rep.fitted_bound = 1.0 - static_cast<double>(h_prime.size()) *
                              std::exp(-(cfg.rho - cfg.rho_prime) * L +
                                       rep.exponent_constant * cfg.rho * L * L * ln / sq);
  rep.chernoff_bound = 1.0 - chern;
  rep.holds = rep.frequency.hi >= rep.fitted_bound;
  rep.holds_chernoff = rep.frequency.hi >= rep.chernoff_bound;
  return rep;
}

}  // namespace rwdre::slt
