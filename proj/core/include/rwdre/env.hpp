#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "rwdre/rng.hpp"

namespace rwdre::env {

inline constexpr int kBlock = 64;

constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a / b - ((a % b != 0) && ((a < 0) != (b < 0)));
}

// Sites outside [lo,hi] draw counts and trajectories from `seed` instead of the main seed.
struct Splice {
  std::int64_t lo = 0;
  std::int64_t hi = -1;
  std::uint64_t seed = 0;
};

struct EnvConfig {
  double rho = 1.0;
  double q = 0.5;
  std::int64_t x_min = -100;
  std::int64_t x_max = 100;
  std::optional<std::int64_t> t_min;  // defaults to -t_max/4
  std::int64_t t_max = 100;
  std::uint64_t seed = 1;
  // backward-increment seed; 0 means "derived from seed"
  std::uint64_t past_seed = 0;
  std::optional<Splice> splice;
  double max_particles = 2e8;

  std::int64_t resolved_t_min() const { return t_min ? *t_min : -(t_max / 4); }
  void validate() const;
};

// 64 lazy steps packed in two words: step j is 0 if move bit j is clear, otherwise
// +1 or -1 according to dir bit j.
struct BlockWords {
  std::uint64_t move = 0;
  std::uint64_t dir = 0;
};

int block_sum(const BlockWords& w, int steps = kBlock);

struct BlockExtremes {
  int sum = 0;
  int min_prefix = 0;  // over prefixes 0..64, including the empty one
  int max_prefix = 0;
};
BlockExtremes block_extremes(const BlockWords& w);

struct ParticleId {
  std::int64_t z = 0;
  std::uint32_t i = 0;
  bool operator==(const ParticleId&) const = default;
};

struct ParticleKeys {
  std::uint64_t fwd = 0;
  std::uint64_t bwd = 0;
};

class Occupancy {
 public:
  virtual ~Occupancy() = default;
  virtual int count(std::int64_t x, std::int64_t n) const = 0;
  virtual bool occupied(std::int64_t x, std::int64_t n) const { return count(x, n) > 0; }
  // false where the view cannot vouch for the infinite-volume occupancy
  virtual bool certified(std::int64_t, std::int64_t) const { return true; }
};

// Finite-window realization of the Poisson cloud of two-sided lazy walks. Every
// per-site count and every per-particle increment stream is a pure function of
// (seed, z, i, block), so nothing is stored up front and enlarging the window leaves
// existing particles untouched. count()/occupied() are thread-safe.
class Environment : public Occupancy {
 public:
  explicit Environment(EnvConfig cfg);
  ~Environment() override;

  const EnvConfig& config() const { return cfg_; }
  std::int64_t x_min() const { return cfg_.x_min; }
  std::int64_t x_max() const { return cfg_.x_max; }
  std::int64_t t_min() const { return t_min_; }
  std::int64_t t_max() const { return cfg_.t_max; }
  double q() const { return cfg_.q; }
  double rho() const { return cfg_.rho; }

  bool in_window(std::int64_t x, std::int64_t n) const;
  bool in_exact_region(std::int64_t x, std::int64_t n) const;

  // N(z,0); defined for every z, the window only limits public queries
  std::uint32_t initial_count(std::int64_t z) const;
  ParticleKeys keys(const ParticleId& p) const;
  BlockWords forward_block(std::uint64_t fwd_key, std::int64_t b) const;
  BlockWords backward_block(std::uint64_t bwd_key, std::int64_t b) const;
  // S_t - S_0 for any integer t (negative t walks the backward stream)
  std::int64_t displacement(const ParticleKeys& k, std::int64_t t) const;
  std::int64_t position(const ParticleId& p, std::int64_t t) const;
  // positions at t_min..t_max
  std::vector<std::int64_t> trajectory(const ParticleId& p) const;
  // positions at times from..to of the particle started at z with keys k
  std::vector<std::int64_t> path(const ParticleKeys& k, std::int64_t z, std::int64_t from,
                                 std::int64_t to) const;

  // particles whose time-0 site lies in the window
  const std::vector<ParticleId>& particles() const;

  int count(std::int64_t x, std::int64_t n) const override;
  bool certified(std::int64_t x, std::int64_t n) const override { return in_exact_region(x, n); }
  // full scan over all window particles
  int brute_count(std::int64_t x, std::int64_t n) const;

 private:
  std::uint64_t site_seed(std::int64_t z) const;

  EnvConfig cfg_;
  std::int64_t t_min_;
  std::uint64_t past_seed_;
  BernoulliWord move_;
  struct Lazy;
  std::unique_ptr<Lazy> lazy_;
};

// Sequential occupancy oracle for a walker: keeps every particle of the walker's light
// cone at the current 64-step block boundary, bucketed by position. Queries must lie
// in the exact region; any time order is allowed but monotone time is fast. Not
// thread-safe: one cursor per walker.
class WalkCursor : public Occupancy {
 public:
  explicit WalkCursor(const Environment& env);
  int count(std::int64_t x, std::int64_t n) const override;
  bool certified(std::int64_t x, std::int64_t n) const override { return env_.in_exact_region(x, n); }
  const Environment& environment() const { return env_; }
  std::int64_t covered_lo() const { return zlo_; }
  std::int64_t covered_hi() const { return zhi_; }

  struct Near {
    ParticleId id;
    ParticleKeys keys;
    std::int64_t position;
  };
  // particles at time n within distance r of x (n must be queryable)
  std::vector<Near> near(std::int64_t x, std::int64_t n, std::int64_t r) const;

 private:
  struct P {
    ParticleKeys keys;
    std::int64_t z;
    std::uint32_t i;
    std::int64_t anchor;
    BlockWords w;
  };
  void move_to(std::int64_t b) const;
  void cover(std::int64_t lo, std::int64_t hi) const;
  void rebucket() const;
  std::int64_t anchor_time() const;
  std::int64_t at(const P& p, std::int64_t n) const;
  void check(std::int64_t x, std::int64_t n) const;

  const Environment& env_;
  mutable std::vector<P> ps_;
  mutable std::int64_t block_ = 0;
  mutable bool has_block_ = false;
  mutable std::int64_t zlo_ = 0, zhi_ = -1;
  mutable std::int64_t blo_ = 0;
  mutable std::vector<std::uint32_t> start_;
  mutable std::vector<std::uint32_t> order_;
};

// Dense counts on a space-time rectangle inside the exact region.
class OccupancyGrid : public Occupancy {
 public:
  OccupancyGrid(const Environment& env, std::int64_t x_lo, std::int64_t x_hi, std::int64_t n_lo,
                std::int64_t n_hi);
  int count(std::int64_t x, std::int64_t n) const override;
  bool certified(std::int64_t x, std::int64_t n) const override {
    return x >= xlo_ && x <= xhi_ && n >= nlo_ && n <= nhi_;
  }
  std::int64_t x_lo() const { return xlo_; }
  std::int64_t x_hi() const { return xhi_; }
  std::int64_t n_lo() const { return nlo_; }
  std::int64_t n_hi() const { return nhi_; }

 private:
  std::int64_t xlo_, xhi_, nlo_, nhi_;
  std::vector<std::uint16_t> cells_;
};

// Explicit extra trajectory: positions at times t0, t0+1, ...
struct Trajectory {
  std::int64_t t0 = 0;
  std::vector<std::int64_t> x;
  std::int64_t at(std::int64_t n) const;  // throws RangeError outside its span
  bool covers(std::int64_t n) const { return n >= t0 && n < t0 + static_cast<std::int64_t>(x.size()); }
};

class AugmentedOccupancy : public Occupancy {
 public:
  AugmentedOccupancy(const Occupancy& base, std::vector<Trajectory> extra);
  int count(std::int64_t x, std::int64_t n) const override;
  bool certified(std::int64_t x, std::int64_t n) const override { return base_.certified(x, n); }

 private:
  const Occupancy& base_;
  std::vector<Trajectory> extra_;
};

// Cov(1{(0,0) occupied}, 1{(0,n) occupied}) = e^{-2 rho}(e^{rho p_n(0,0)} - 1); n >= 1.
double covariance_theory(double rho, double q, int n);

struct Box {
  std::int64_t a = 0, b = 0;    // space
  std::int64_t n0 = 0, n1 = 0;  // time, 0 <= n0 <= n1
};

// Occupancy on B agrees in both environments. Throws PreconditionError when the
// counts on the separating segment at time 0 or the forward paths of its particles
// differ.
bool boundary_determinism_check(const Environment& e1, const Environment& e2, const Box& B);

}  // namespace rwdre::env
