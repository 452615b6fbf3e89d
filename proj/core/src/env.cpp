#include "rwdre/env.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <string>

#include "rwdre/error.hpp"
#include "rwdre/kernel.hpp"

namespace rwdre::env {

namespace {

constexpr std::uint64_t kFwdTag = 0xF0;
constexpr std::uint64_t kBwdTag = 0xB0;
constexpr std::uint64_t kCountTag = 0xC0;
constexpr std::uint64_t kPastTag = 0x9A57;

struct ByteEntry {
  std::int8_t sum, lo, hi;
};

// indexed by (move byte << 8) | dir byte
const std::array<ByteEntry, 65536>& byte_table() {
  static const auto table = [] {
    std::array<ByteEntry, 65536> t{};
    for (int m = 0; m < 256; ++m) {
      for (int d = 0; d < 256; ++d) {
        int s = 0, lo = 0, hi = 0;
        for (int j = 0; j < 8; ++j) {
          if ((m >> j) & 1) s += ((d >> j) & 1) ? 1 : -1;
          lo = std::min(lo, s);
          hi = std::max(hi, s);
        }
        t[(m << 8) | d] = {static_cast<std::int8_t>(s), static_cast<std::int8_t>(lo),
                           static_cast<std::int8_t>(hi)};
      }
    }
    return t;
  }();
  return table;
}

int step_of(const BlockWords& w, int j) {
  if (!((w.move >> j) & 1ULL)) return 0;
  return ((w.dir >> j) & 1ULL) ? 1 : -1;
}

}  // namespace

int block_sum(const BlockWords& w, int steps) {
  const std::uint64_t mask = steps >= kBlock ? ~0ULL : ((1ULL << steps) - 1);
  const std::uint64_t m = w.move & mask;
  return std::popcount(m & w.dir) - std::popcount(m & ~w.dir);
}

BlockExtremes block_extremes(const BlockWords& w) {
  const auto& t = byte_table();
  BlockExtremes e;
  int s = 0;
  for (int k = 0; k < 8; ++k) {
    const unsigned m = (w.move >> (8 * k)) & 0xFF;
    const unsigned d = (w.dir >> (8 * k)) & 0xFF;
    const ByteEntry& b = t[(m << 8) | d];
    e.min_prefix = std::min(e.min_prefix, s + b.lo);
    e.max_prefix = std::max(e.max_prefix, s + b.hi);
    s += b.sum;
  }
  e.sum = s;
  return e;
}

void EnvConfig::validate() const {
  require(std::isfinite(rho) && rho >= 0.0, "rho must be a finite nonnegative number");
  require(rho <= 700.0, "rho above 700 is not supported");
  require(q >= 0.0 && q <= 1.0, "q must lie in [0,1]");
  require(x_min <= x_max, "x_min must not exceed x_max");
  require(t_max >= 0, "t_max must be nonnegative");
  require(resolved_t_min() <= 0, "t_min must be nonpositive");
  if (splice) require(splice->lo <= splice->hi, "splice interval is empty");
}

struct Environment::Lazy {
  std::once_flag once;
  std::vector<ParticleId> particles;
  std::mutex mu;
  std::map<std::int64_t, std::vector<std::int64_t>> slices;
};

Environment::Environment(EnvConfig cfg)
    : cfg_(std::move(cfg)), t_min_(0), past_seed_(0), move_(1.0 - cfg_.q), lazy_(std::make_unique<Lazy>()) {
  cfg_.validate();
  t_min_ = cfg_.resolved_t_min();
  past_seed_ = cfg_.past_seed != 0 ? cfg_.past_seed : hash_keys(cfg_.seed, {kPastTag});
  const double width = static_cast<double>(cfg_.x_max - cfg_.x_min) + 1.0;
  if (cfg_.rho * width > cfg_.max_particles)
    throw ResourceError("expected particle count " + std::to_string(cfg_.rho * width) +
                        " exceeds the cap " + std::to_string(cfg_.max_particles));
}

Environment::~Environment() = default;

bool Environment::in_window(std::int64_t x, std::int64_t n) const {
  return x >= cfg_.x_min && x <= cfg_.x_max && n >= t_min_ && n <= cfg_.t_max;
}

bool Environment::in_exact_region(std::int64_t x, std::int64_t n) const {
  const std::int64_t a = std::abs(n);
  return n >= t_min_ && n <= cfg_.t_max && x >= cfg_.x_min + a && x <= cfg_.x_max - a;
}

std::uint64_t Environment::site_seed(std::int64_t z) const {
  if (cfg_.splice && (z < cfg_.splice->lo || z > cfg_.splice->hi)) return cfg_.splice->seed;
  return cfg_.seed;
}

std::uint32_t Environment::initial_count(std::int64_t z) const {
  if (cfg_.rho <= 0.0) return 0;
  return poisson_inverse(cfg_.rho, to_unit(hash_keys(site_seed(z), {kCountTag, as_key(z)})));
}

ParticleKeys Environment::keys(const ParticleId& p) const {
  const std::uint64_t s = site_seed(p.z);
  const std::uint64_t past = s == cfg_.seed ? past_seed_ : hash_keys(s, {kPastTag});
  return {hash_keys(s, {kFwdTag, as_key(p.z), p.i}), hash_keys(past, {kBwdTag, as_key(p.z), p.i})};
}

BlockWords Environment::forward_block(std::uint64_t fwd_key, std::int64_t b) const {
  Stream s(hash_keys(fwd_key, {as_key(b)}));
  BlockWords w;
  w.dir = s.next();
  w.move = move_.draw(s);
  return w;
}

BlockWords Environment::backward_block(std::uint64_t bwd_key, std::int64_t b) const {
  return forward_block(bwd_key, b);
}

std::int64_t Environment::displacement(const ParticleKeys& k, std::int64_t t) const {
  const bool fwd = t >= 0;
  const std::int64_t m = fwd ? t : -t;
  const std::uint64_t key = fwd ? k.fwd : k.bwd;
  std::int64_t s = 0;
  const std::int64_t full = m / kBlock;
  for (std::int64_t b = 0; b < full; ++b) s += block_sum(forward_block(key, b));
  const int rem = static_cast<int>(m % kBlock);
  if (rem) s += block_sum(forward_block(key, full), rem);
  return s;
}

std::int64_t Environment::position(const ParticleId& p, std::int64_t t) const {
  return p.z + displacement(keys(p), t);
}

std::vector<std::int64_t> Environment::path(const ParticleKeys& k, std::int64_t z, std::int64_t from,
                                            std::int64_t to) const {
  std::vector<std::int64_t> out;
  if (to < from) return out;
  out.reserve(static_cast<std::size_t>(to - from + 1));
  std::int64_t pos = z + displacement(k, from);
  std::int64_t cached = -1;
  bool cached_fwd = true;
  BlockWords w;
  for (std::int64_t n = from;; ++n) {
    out.push_back(pos);
    if (n == to) break;
    // step n -> n+1
    if (n >= 0) {
      const std::int64_t b = n / kBlock;
      if (!cached_fwd || cached != b) {
        w = forward_block(k.fwd, b);
        cached = b;
        cached_fwd = true;
      }
      pos += step_of(w, static_cast<int>(n % kBlock));
    } else {
      // S_{n+1} = S_n - s_{-n-1} for backward step index -n-1
      const std::int64_t j = -n - 1;
      const std::int64_t b = j / kBlock;
      if (cached_fwd || cached != b) {
        w = backward_block(k.bwd, b);
        cached = b;
        cached_fwd = false;
      }
      pos -= step_of(w, static_cast<int>(j % kBlock));
    }
  }
  return out;
}

std::vector<std::int64_t> Environment::trajectory(const ParticleId& p) const {
  return path(keys(p), p.z, t_min_, cfg_.t_max);
}

const std::vector<ParticleId>& Environment::particles() const {
  std::call_once(lazy_->once, [this] {
    auto& v = lazy_->particles;
    for (std::int64_t z = cfg_.x_min; z <= cfg_.x_max; ++z) {
      const std::uint32_t c = initial_count(z);
      for (std::uint32_t i = 0; i < c; ++i) v.push_back({z, i});
    }
  });
  return lazy_->particles;
}

int Environment::count(std::int64_t x, std::int64_t n) const {
  if (!in_window(x, n))
    throw RangeError("query (" + std::to_string(x) + "," + std::to_string(n) + ") outside the window");
  const std::vector<std::int64_t>* slice = nullptr;
  {
    std::lock_guard<std::mutex> lock(lazy_->mu);
    auto it = lazy_->slices.find(n);
    if (it == lazy_->slices.end()) {
      std::vector<std::int64_t> pos;
      const auto& ps = particles();
      pos.reserve(ps.size());
      for (const auto& p : ps) pos.push_back(position(p, n));
      std::sort(pos.begin(), pos.end());
      it = lazy_->slices.emplace(n, std::move(pos)).first;
    }
    slice = &it->second;
  }
  auto [lo, hi] = std::equal_range(slice->begin(), slice->end(), x);
  return static_cast<int>(hi - lo);
}

int Environment::brute_count(std::int64_t x, std::int64_t n) const {
  if (!in_window(x, n))
    throw RangeError("query (" + std::to_string(x) + "," + std::to_string(n) + ") outside the window");
  int c = 0;
  for (const auto& p : particles()) c += position(p, n) == x;
  return c;
}

// ---------------------------------------------------------------------------

WalkCursor::WalkCursor(const Environment& env) : env_(env) {}

void WalkCursor::check(std::int64_t x, std::int64_t n) const {
  if (!env_.in_exact_region(x, n))
    throw CertifiedRegionError("site (" + std::to_string(x) + "," + std::to_string(n) +
                               ") lies outside the exact region");
}

std::int64_t WalkCursor::anchor_time() const { return block_ >= 0 ? kBlock * block_ : kBlock * block_ + kBlock; }

std::int64_t WalkCursor::at(const P& p, std::int64_t n) const {
  if (block_ >= 0) return p.anchor + block_sum(p.w, static_cast<int>(n - anchor_time()));
  return p.anchor + block_sum(p.w, static_cast<int>(anchor_time() - n));
}

void WalkCursor::move_to(std::int64_t b) const {
  if (has_block_ && b == block_) return;
  if (!has_block_ || std::abs(b - block_) > 8) {
    block_ = b;
    has_block_ = true;
    const std::int64_t t = anchor_time();
    for (auto& p : ps_) {
      p.anchor = p.z + env_.displacement(p.keys, t);
      p.w = b >= 0 ? env_.forward_block(p.keys.fwd, b) : env_.backward_block(p.keys.bwd, -b - 1);
    }
    rebucket();
    return;
  }
  while (block_ < b) {
    const std::int64_t nb = block_ + 1;
    for (auto& p : ps_) {
      if (block_ >= 0) {
        p.anchor += block_sum(p.w);
        p.w = env_.forward_block(p.keys.fwd, nb);
      } else if (nb == 0) {
        p.w = env_.forward_block(p.keys.fwd, 0);
      } else {
        p.w = env_.backward_block(p.keys.bwd, -nb - 1);
        p.anchor -= block_sum(p.w);
      }
    }
    block_ = nb;
  }
  while (block_ > b) {
    const std::int64_t nb = block_ - 1;
    for (auto& p : ps_) {
      if (block_ > 0) {
        p.w = env_.forward_block(p.keys.fwd, nb);
        p.anchor -= block_sum(p.w);
      } else if (block_ == 0) {
        p.w = env_.backward_block(p.keys.bwd, 0);
      } else {
        p.anchor += block_sum(p.w);
        p.w = env_.backward_block(p.keys.bwd, -nb - 1);
      }
    }
    block_ = nb;
  }
  rebucket();
}

void WalkCursor::cover(std::int64_t lo, std::int64_t hi) const {
  lo = std::max(lo, env_.x_min());
  hi = std::min(hi, env_.x_max());
  if (lo > hi) return;
  if (zlo_ <= zhi_ && lo >= zlo_ && hi <= zhi_) return;
  // grow with slack so a walker drifting one site per step does not rebucket each step
  std::int64_t nlo = lo, nhi = hi;
  if (zlo_ <= zhi_) {
    nlo = std::max(env_.x_min(), std::min(lo - kBlock, zlo_));
    nhi = std::min(env_.x_max(), std::max(hi + kBlock, zhi_));
    if (lo >= zlo_) nlo = zlo_;
    if (hi <= zhi_) nhi = zhi_;
  }
  const std::int64_t t = anchor_time();
  auto add = [&](std::int64_t a, std::int64_t b) {
    for (std::int64_t z = a; z <= b; ++z) {
      const std::uint32_t c = env_.initial_count(z);
      for (std::uint32_t i = 0; i < c; ++i) {
        P p;
        p.keys = env_.keys({z, i});
        p.z = z;
        p.i = i;
        p.anchor = z + env_.displacement(p.keys, t);
        p.w = block_ >= 0 ? env_.forward_block(p.keys.fwd, block_) : env_.backward_block(p.keys.bwd, -block_ - 1);
        ps_.push_back(p);
      }
    }
  };
  if (zlo_ > zhi_) {
    add(nlo, nhi);
  } else {
    if (nlo < zlo_) add(nlo, zlo_ - 1);
    if (nhi > zhi_) add(zhi_ + 1, nhi);
  }
  zlo_ = nlo;
  zhi_ = nhi;
  rebucket();
}

void WalkCursor::rebucket() const {
  start_.clear();
  order_.clear();
  if (ps_.empty()) return;
  std::int64_t lo = ps_[0].anchor, hi = lo;
  for (const auto& p : ps_) {
    lo = std::min(lo, p.anchor);
    hi = std::max(hi, p.anchor);
  }
  blo_ = lo;
  const std::size_t span = static_cast<std::size_t>(hi - lo + 1);
  start_.assign(span + 1, 0);
  for (const auto& p : ps_) ++start_[static_cast<std::size_t>(p.anchor - lo) + 1];
  for (std::size_t k = 1; k <= span; ++k) start_[k] += start_[k - 1];
  order_.resize(ps_.size());
  std::vector<std::uint32_t> fill(start_.begin(), start_.end() - 1);
  for (std::uint32_t idx = 0; idx < ps_.size(); ++idx)
    order_[fill[static_cast<std::size_t>(ps_[idx].anchor - lo)]++] = idx;
}

int WalkCursor::count(std::int64_t x, std::int64_t n) const {
  check(x, n);
  move_to(floor_div(n, kBlock));
  const std::int64_t a = n < 0 ? -n : n;
  cover(x - a, x + a);
  if (start_.empty()) return 0;
  const std::int64_t d = std::abs(n - anchor_time());
  const std::int64_t span = static_cast<std::int64_t>(start_.size()) - 1;
  const std::int64_t k0 = std::max<std::int64_t>(0, x - d - blo_);
  const std::int64_t k1 = std::min<std::int64_t>(span - 1, x + d - blo_);
  int c = 0;
  for (std::int64_t k = k0; k <= k1; ++k)
    for (std::uint32_t s = start_[k]; s < start_[k + 1]; ++s) c += at(ps_[order_[s]], n) == x;
  return c;
}

std::vector<WalkCursor::Near> WalkCursor::near(std::int64_t x, std::int64_t n, std::int64_t r) const {
  check(x - r, n);
  check(x + r, n);
  move_to(floor_div(n, kBlock));
  const std::int64_t a = n < 0 ? -n : n;
  cover(x - r - a, x + r + a);
  std::vector<Near> out;
  if (start_.empty()) return out;
  const std::int64_t d = std::abs(n - anchor_time());
  const std::int64_t span = static_cast<std::int64_t>(start_.size()) - 1;
  const std::int64_t k0 = std::max<std::int64_t>(0, x - r - d - blo_);
  const std::int64_t k1 = std::min<std::int64_t>(span - 1, x + r + d - blo_);
  for (std::int64_t k = k0; k <= k1; ++k) {
    for (std::uint32_t s = start_[k]; s < start_[k + 1]; ++s) {
      const P& p = ps_[order_[s]];
      const std::int64_t pos = at(p, n);
      if (std::abs(pos - x) <= r) out.push_back({{p.z, p.i}, p.keys, pos});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

OccupancyGrid::OccupancyGrid(const Environment& env, std::int64_t x_lo, std::int64_t x_hi, std::int64_t n_lo,
                             std::int64_t n_hi)
    : xlo_(x_lo), xhi_(x_hi), nlo_(n_lo), nhi_(n_hi) {
  require(x_lo <= x_hi && n_lo <= n_hi, "grid box is empty");
  for (std::int64_t n : {n_lo, n_hi})
    for (std::int64_t x : {x_lo, x_hi})
      if (!env.in_exact_region(x, n))
        throw CertifiedRegionError("grid corner (" + std::to_string(x) + "," + std::to_string(n) +
                                   ") lies outside the exact region");
  const double cells = static_cast<double>(x_hi - x_lo + 1) * static_cast<double>(n_hi - n_lo + 1);
  if (cells > 4e8) throw ResourceError("occupancy grid of " + std::to_string(cells) + " cells");
  const std::int64_t W = x_hi - x_lo + 1;
  cells_.assign(static_cast<std::size_t>(cells), 0);
  const std::int64_t R = std::max(std::abs(n_lo), std::abs(n_hi));
  const std::int64_t zlo = std::max(env.x_min(), x_lo - R), zhi = std::min(env.x_max(), x_hi + R);
  for (std::int64_t z = zlo; z <= zhi; ++z) {
    const std::uint32_t c = env.initial_count(z);
    for (std::uint32_t i = 0; i < c; ++i) {
      const auto path = env.path(env.keys({z, i}), z, n_lo, n_hi);
      for (std::size_t t = 0; t < path.size(); ++t) {
        const std::int64_t x = path[t];
        if (x >= x_lo && x <= x_hi) ++cells_[t * static_cast<std::size_t>(W) + static_cast<std::size_t>(x - x_lo)];
      }
    }
  }
}

int OccupancyGrid::count(std::int64_t x, std::int64_t n) const {
  if (x < xlo_ || x > xhi_ || n < nlo_ || n > nhi_)
    throw RangeError("query (" + std::to_string(x) + "," + std::to_string(n) + ") outside the grid");
  const std::size_t W = static_cast<std::size_t>(xhi_ - xlo_ + 1);
  return cells_[static_cast<std::size_t>(n - nlo_) * W + static_cast<std::size_t>(x - xlo_)];
}

std::int64_t Trajectory::at(std::int64_t n) const {
  if (!covers(n)) throw RangeError("trajectory does not cover time " + std::to_string(n));
  return x[static_cast<std::size_t>(n - t0)];
}

AugmentedOccupancy::AugmentedOccupancy(const Occupancy& base, std::vector<Trajectory> extra)
    : base_(base), extra_(std::move(extra)) {}

int AugmentedOccupancy::count(std::int64_t x, std::int64_t n) const {
  int c = base_.count(x, n);
  for (const auto& t : extra_) c += t.covers(n) && t.at(n) == x;
  return c;
}

// ---------------------------------------------------------------------------

double covariance_theory(double rho, double q, int n) {
  require(n >= 1, "covariance_theory is defined for n >= 1");
  require(rho >= 0.0, "rho must be nonnegative");
  const double p = kernel::heat_kernel(q, n)(0);
  return std::exp(-2.0 * rho) * std::expm1(rho * p);
}

bool boundary_determinism_check(const Environment& e1, const Environment& e2, const Box& B) {
  require(B.a <= B.b && 0 <= B.n0 && B.n0 <= B.n1, "box must satisfy a <= b and 0 <= n0 <= n1");
  const std::int64_t hlo = B.a - B.n1, hhi = B.b + B.n1;
  const std::int64_t nb = (B.n1 + kBlock - 1) / kBlock;
  for (std::int64_t z = hlo; z <= hhi; ++z) {
    const std::uint32_t c = e1.initial_count(z);
    if (c != e2.initial_count(z))
      throw PreconditionError("counts differ on the separating segment at z=" + std::to_string(z));
    for (std::uint32_t i = 0; i < c; ++i) {
      const auto k1 = e1.keys({z, i}), k2 = e2.keys({z, i});
      for (std::int64_t b = 0; b < nb; ++b) {
        const int steps = static_cast<int>(std::min<std::int64_t>(kBlock, B.n1 - b * kBlock));
        const std::uint64_t mask = steps >= kBlock ? ~0ULL : ((1ULL << steps) - 1);
        const auto w1 = e1.forward_block(k1.fwd, b), w2 = e2.forward_block(k2.fwd, b);
        const std::uint64_t m1 = w1.move & mask, m2 = w2.move & mask;
        if (m1 != m2 || (w1.dir & m1) != (w2.dir & m2))
          throw PreconditionError("forward increments differ for particle (" + std::to_string(z) + "," +
                                  std::to_string(i) + ")");
      }
    }
  }
  const OccupancyGrid g1(e1, B.a, B.b, B.n0, B.n1), g2(e2, B.a, B.b, B.n0, B.n1);
  for (std::int64_t n = B.n0; n <= B.n1; ++n)
    for (std::int64_t x = B.a; x <= B.b; ++x)
      if ((g1.count(x, n) > 0) != (g2.count(x, n) > 0)) return false;
  return true;
}

}  // namespace rwdre::env
