#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rwdre/env.hpp"
#include "rwdre/rng.hpp"

namespace rwdre::walker {

struct WalkParams {
  double p_circ = 0.5;    // P(+1) on vacant sites
  double p_bullet = 0.5;  // P(+1) on occupied sites
  double v_circ() const { return 2.0 * p_circ - 1.0; }
  double v_bullet() const { return 2.0 * p_bullet - 1.0; }
  void validate() const;
};

// U_y for y = (x,n), keyed on (seed, x, n).
class UniformField {
 public:
  explicit UniformField(std::uint64_t seed) : seed_(seed) {}
  double operator()(std::int64_t x, std::int64_t n) const {
    return to_unit(hash_keys(seed_, {as_key(x), as_key(n)}));
  }
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

struct Point {
  std::int64_t x = 0;
  std::int64_t n = 0;
  bool operator==(const Point&) const = default;
};

struct Path {
  Point start;
  std::vector<std::int64_t> x;  // X_0..X_steps
  std::int64_t steps() const { return static_cast<std::int64_t>(x.size()) - 1; }
  Point at(std::int64_t i) const { return {x[static_cast<std::size_t>(i)], start.n + i}; }
  Point end() const { return at(steps()); }
};

// Right step iff U_y <= p_bullet on occupied y, U_y <= p_circ on vacant y.
bool goes_right(const env::Occupancy& occ, const UniformField& U, const WalkParams& w, Point y);
Point step(const env::Occupancy& occ, const UniformField& U, const WalkParams& w, Point y);
Path run_walk(const env::Occupancy& occ, const UniformField& U, const WalkParams& w, Point y0, std::int64_t steps);

// Walks from (x,n) and (x',n) sharing environment and field; asserts the ordering.
std::pair<Path, Path> coupled_pair_initial(const env::Occupancy& occ, const UniformField& U, const WalkParams& w,
                                           Point y, Point yp, std::int64_t steps);

// Walks from y0 in occ and in occ plus the extra trajectories; asserts the ordering.
std::pair<Path, Path> coupled_pair_environment(const env::Occupancy& occ, const std::vector<env::Trajectory>& extra,
                                               const UniformField& U, const WalkParams& w, Point y0,
                                               std::int64_t steps);

// Window whose exact region contains every point a walk of `steps` steps from (0,0)
// can visit, plus `margin` sites on each side.
env::EnvConfig walk_window(double rho, double q, std::int64_t steps, std::int64_t margin, std::uint64_t seed);

}  // namespace rwdre::walker
