#include "rwdre/walker.hpp"

#include <string>

#include "rwdre/error.hpp"

namespace rwdre::walker {

void WalkParams::validate() const {
  require(p_circ >= 0.0 && p_circ <= 1.0, "p_circ must lie in [0,1]");
  require(p_bullet >= 0.0 && p_bullet <= 1.0, "p_bullet must lie in [0,1]");
}

bool goes_right(const env::Occupancy& occ, const UniformField& U, const WalkParams& w, Point y) {
  if (!occ.certified(y.x, y.n))
    throw CertifiedRegionError("walker consulted (" + std::to_string(y.x) + "," + std::to_string(y.n) +
                               ") outside the exact region");
  // the environment is irrelevant to a homogeneous walk; skip the lookup
  const double p = w.p_circ == w.p_bullet ? w.p_bullet : occ.occupied(y.x, y.n) ? w.p_bullet : w.p_circ;
  return U(y.x, y.n) <= p;
}

Point step(const env::Occupancy& occ, const UniformField& U, const WalkParams& w, Point y) {
  return {y.x + (goes_right(occ, U, w, y) ? 1 : -1), y.n + 1};
}

Path run_walk(const env::Occupancy& occ, const UniformField& U, const WalkParams& w, Point y0, std::int64_t steps) {
  w.validate();
  require(steps >= 0, "steps must be nonnegative");
  Path p;
  p.start = y0;
  p.x.reserve(static_cast<std::size_t>(steps) + 1);
  p.x.push_back(y0.x);
  Point y = y0;
  for (std::int64_t i = 0; i < steps; ++i) {
    y = step(occ, U, w, y);
    p.x.push_back(y.x);
  }
  return p;
}

std::pair<Path, Path> coupled_pair_initial(const env::Occupancy& occ, const UniformField& U, const WalkParams& w,
                                           Point y, Point yp, std::int64_t steps) {
  if (y.n != yp.n) throw PreconditionError("coupled starts must share the time coordinate");
  if (y.x > yp.x || (yp.x - y.x) % 2 != 0)
    throw PreconditionError("coupled starts need x <= x' with x' - x even");
  auto a = run_walk(occ, U, w, y, steps);
  auto b = run_walk(occ, U, w, yp, steps);
  for (std::int64_t i = 0; i <= steps; ++i)
    if (a.x[i] > b.x[i]) throw SimulationError("monotone coupling in the starting point violated at step " + std::to_string(i));
  return {std::move(a), std::move(b)};
}

std::pair<Path, Path> coupled_pair_environment(const env::Occupancy& occ, const std::vector<env::Trajectory>& extra,
                                               const UniformField& U, const WalkParams& w, Point y0,
                                               std::int64_t steps) {
  w.validate();
  if (w.v_circ() > w.v_bullet()) throw PreconditionError("environment coupling needs v_circ <= v_bullet");
  const env::AugmentedOccupancy more(occ, extra);
  auto a = run_walk(occ, U, w, y0, steps);
  auto b = run_walk(more, U, w, y0, steps);
  for (std::int64_t i = 0; i <= steps; ++i)
    if (a.x[i] > b.x[i]) throw SimulationError("monotone coupling in the environment violated at step " + std::to_string(i));
  return {std::move(a), std::move(b)};
}

env::EnvConfig walk_window(double rho, double q, std::int64_t steps, std::int64_t margin, std::uint64_t seed) {
  require(steps >= 0 && margin >= 0, "steps and margin must be nonnegative");
  env::EnvConfig c;
  c.rho = rho;
  c.q = q;
  c.x_min = -(2 * steps + margin);
  c.x_max = 2 * steps + margin;
  c.t_max = steps;
  c.t_min = 0;
  c.seed = seed;
  return c;
}

}  // namespace rwdre::walker
