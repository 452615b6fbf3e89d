#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rwdre/env.hpp"
#include "rwdre/stat_tests.hpp"
#include "rwdre/walker.hpp"

namespace rwdre::regen {

using walker::Point;

// Cone comparisons on phi(x,n) = x - v_bar n are made with this slack so that exact
// rational ties (e.g. v_bar = 1/3) are not lost to rounding.
inline constexpr double kConeEps = 1e-9;

struct ConeParams {
  double v_star = 0.3;
  double v_bar() const { return v_star / 3.0; }
};

// y - base in {n >= 0, x >= v_bar n}
bool in_up_cone(Point base, Point y, double v_bar);
// y - base in {n <= 0, x < v_bar n}
bool in_down_cone(Point base, Point y, double v_bar);

// Largest k with y in the k-th record cone, floor((x - v_bar n)/(1 - v_bar)); needs n >= 0.
// Values below 1 mean y lies in none of the cones k >= 1.
std::int64_t kappa(Point y, double v_bar);

struct Record {
  std::int64_t k = 0;
  std::int64_t R = 0;  // time relative to the path start
};
// Records of X_i - X_0 for k = 1, 2, ... up to the path length.
std::vector<Record> record_times(const walker::Path& path, double v_bar);

struct RegenConfig {
  double v_star = 0.3;
  double T = 200.0;
  std::optional<double> c2_hat;  // default v_bar / 2
  double cert_tol = 1e-3;
  std::int64_t initial_chunk = 2048;
  bool details = false;  // per-record h, h^T and good-record flags
};

struct Derived {
  double v_bar = 0.0;
  double delta = 0.0;
  double c2_hat = 0.0;
  double epsilon = 0.0;
  std::int64_t T_prime = 0;
  std::int64_t T_dprime = 0;
};
// Throws ParameterError when T'' = floor(delta log T) would be 0 or p_circ ^ p_bullet is 0 or 1.
Derived derive(const RegenConfig& cfg, const walker::WalkParams& w);

// ---- analytic tails used by the certificates ----

// Positive root of q + (1-q) cosh(theta) = e^{theta v}; +inf when q = 1.
double crossing_theta(double q, double v_bar);
// Bound on the probability that a lazy walk started d >= 0 below a line of slope v_bar
// ever reaches it (same bound for the time-reversed walk and the mirrored line).
double crossing_bound(double q, double v_bar, double d);
// Positive root of p e^{-theta(1-v)} + (1-p) e^{theta(1+v)} = 1; 0 when 2p - 1 <= v, +inf when p = 1.
double confinement_theta(double p, double v_bar);
// Bound on the probability that a walk whose right-step probability is at least p ever
// falls more than `margin` below a line of slope v_bar.
double confinement_bound(double p, double v_bar, double margin);
// Expected number of particles at distance > M from a point that cross the cone boundary
// through it (union bound over both sides).
double outside_bound(double rho, double q, double v_bar, std::int64_t M);

// ---- trajectory-set queries at y ----

struct CrossResult {
  bool empty = true;  // no trajectory in W^x_y was found
  double residual = 0.0;
  int examined = 0;
};
// Decides omega(W^x_y) = 0. A found member is definitive; emptiness carries the residual.
CrossResult cross_empty(const env::Environment& env, const env::WalkCursor& probe, Point y, double v_bar,
                        double cert_tol);

struct InfluenceResult {
  std::int64_t value = 0;
  bool certified = false;
  double residual = 0.0;
  int members = 0;
};
InfluenceResult influence_field(const env::Environment& env, Point y, double v_bar, double cert_tol);
InfluenceResult influence_field(const env::Environment& env, const env::WalkCursor& probe, Point y, double v_bar,
                                double cert_tol);
InfluenceResult local_influence_field(const env::Environment& env, Point y, const Derived& d, double cert_tol);
InfluenceResult local_influence_field(const env::Environment& env, const env::WalkCursor& probe, Point y,
                                      const Derived& d, double cert_tol);

enum class Tri { False, True, Undetermined };

struct GoodRecord {
  Tri c1 = Tri::Undetermined;  // h^T(Y_R) <= T''
  Tri c2 = Tri::Undetermined;  // U on the diagonal below p_circ ^ p_bullet
  Tri c3 = Tri::Undetermined;  // no trajectory in W^angle_Y cap W^x_{Y+(T'',T'')}
  Tri c4 = Tri::Undetermined;  // path between records k+T'' and k+T' stays in the cone
  Tri good() const;
};

// Flags for every record of the path (records relative to the path start).
std::vector<GoodRecord> good_record_flags(const env::Environment& env, const walker::UniformField& U,
                                          const walker::WalkParams& w, const walker::Path& path,
                                          const Derived& d, double cert_tol);

// ---- regeneration ----

struct RecordInfo {
  std::int64_t k = 0;
  std::int64_t R = 0;
  Point y;
  Tri confined = Tri::Undetermined;  // A^y
  Tri cross_empty = Tri::Undetermined;
  double residual = 0.0;
  std::optional<InfluenceResult> h;
  std::optional<InfluenceResult> hT;
  std::optional<GoodRecord> good;
};

struct RegenReport {
  bool found = false;
  bool certified = false;
  std::int64_t index = 0;  // record index of tau
  std::int64_t tau = 0;    // relative to the start
  std::int64_t x_tau = 0;  // relative to the start
  double residual = 1.0;
  std::int64_t horizon_used = 0;
  std::vector<RecordInfo> records;  // records examined, in order
  walker::Path path;                // walk up to horizon_used
};

RegenReport regeneration_time(const env::Environment& env, const walker::UniformField& U,
                              const walker::WalkParams& w, const RegenConfig& cfg, Point y0, std::int64_t horizon);

struct Segment {
  std::int64_t tau = 0;  // absolute time of the regeneration
  std::int64_t x = 0;    // absolute position
  std::int64_t dt = 0;   // increment from the previous regeneration (or the start)
  std::int64_t dx = 0;
  bool certified = false;
  double residual = 0.0;
};

struct RegenSequence {
  std::vector<Segment> segments;
  bool complete = false;  // count regenerations found and certified
};

// Iterates the construction from each regeneration point; horizon is per regeneration.
RegenSequence regen_sequence(const env::Environment& env, const walker::UniformField& U, const walker::WalkParams& w,
                             const RegenConfig& cfg, Point y0, std::int64_t horizon, int count);

// Window large enough for `total_steps` walk steps from (0,0) and the regeneration scans.
env::EnvConfig regen_window(double rho, double q, std::int64_t total_steps, std::uint64_t seed);

// v = E[X_tau]/E[tau] and sigma^2 = E[(X_tau - tau v)^2]/E[tau] from increments.
stat::Ratio speed_from_increments(const std::vector<double>& dx, const std::vector<double>& dt);
double sigma2_from_increments(const std::vector<double>& dx, const std::vector<double>& dt);

// Rejection sampler for the cone-conditioned law: tries (env, field) pairs derived from
// seed until omega(W^x_0) = 0 and A^0 both certify.
struct AngleSample {
  std::uint64_t env_seed = 0;
  std::uint64_t field_seed = 0;
  int attempts = 0;
  double residual = 0.0;
};
AngleSample angle_rejection_sample(double rho, double q, const walker::WalkParams& w, const RegenConfig& cfg,
                                   std::int64_t horizon, std::uint64_t seed, int max_attempts);

// ---- parallelogram ----

bool in_parallelogram(Point y, Point z, std::int64_t t, double v_bar);
std::vector<Point> right_boundary(Point y, std::int64_t t, double v_bar);
// true iff the walk from y first leaves P_t(y) through its right boundary
bool exits_right(const env::Occupancy& occ, const walker::UniformField& U, const walker::WalkParams& w, Point y,
                 std::int64_t t, double v_bar);

struct ExitProbe {
  double estimate = 0.0;
  double lo = 0.0;  // 95% Wilson interval
  double hi = 1.0;
  int replicas = 0;
  bool positive = false;  // lo > 0
};
ExitProbe parallelogram_exit_probe(double rho, double q, const walker::WalkParams& w, Point y, std::int64_t t,
                                   double v_star, int replicas, std::uint64_t seed);

}  // namespace rwdre::regen
