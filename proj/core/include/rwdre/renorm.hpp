#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "rwdre/env.hpp"
#include "rwdre/walker.hpp"

namespace rwdre::renorm {

using BigInt = boost::multiprecision::cpp_int;

inline constexpr unsigned kExactBits = 1u << 13;

// natural log of a positive big integer, exact to double precision
double log_big(const BigInt& x);

struct LadderConfig {
  std::int64_t L0 = 100;
  double v = 0.2;         // target speed
  double v_bullet = 0.6;  // must exceed v
  double rho0 = 1.0;
  int k_max = 12;
};

struct ScaleLadder {
  LadderConfig cfg;
  double delta = 0.0;           // (v_bullet - v) / 2
  double gamma = 1.5;
  std::vector<BigInt> L;        // exact L_0 .. L_j while L_j has at most kExactBits bits
  std::vector<double> logL;     // log L_k for every k <= kmax
  std::vector<double> v_k;      // index 1 .. kmax; v_k[0] is unused (NaN)
  std::vector<double> rho;      // rho_0 .. rho_kmax
  double rho_star = 0.0;        // infinite product, summed until the factors are 1 in double

  int k_max() const { return cfg.k_max; }
  // L_k as a native integer; RangeError when it does not fit
  std::int64_t L_native(int k) const;
  bool exact(int k) const { return k >= 0 && static_cast<std::size_t>(k) < L.size(); }
  double log_L(int k) const { return logL.at(static_cast<std::size_t>(k)); }
  // floor(L_k^{1/2}); RangeError beyond the exact range
  BigInt root(int k) const;
  // log floor(L_k^{1/2}), from the exact value when available
  double log_root(int k) const;
};

ScaleLadder build_ladder(const LadderConfig& cfg);

// |v_kmax - v - delta (6/pi^2) sum_{j >= kmax} 1/j^2|, the tail evaluated through the trigamma function
double v_limit_residual(const ScaleLadder& ladder);

// delta (6/pi^2) / k^2 >= 4 / floor(L_k^{1/2})
bool k2large_holds(const ScaleLadder& ladder, int k, double delta);
inline bool k2large_holds(const ScaleLadder& ladder, int k) { return k2large_holds(ladder, k, ladder.delta); }

struct K0Result {
  int k0 = 0;              // smallest k0 >= 1 with the inequality on all of [k0, kmax]
  bool in_range = false;   // false when it fails at kmax (k0 reported as kmax + 1)
  std::vector<bool> holds; // index 1 .. kmax
};
K0Result k0_threshold(double delta, const ScaleLadder& ladder);

// ---- geometry

struct Index {
  std::int64_t r = 0;
  std::int64_t s = 0;
  bool operator==(const Index&) const = default;
};

struct Rect {
  std::int64_t x0 = 0, x1 = 0, n0 = 0, n1 = 0;  // closed
  bool contains(std::int64_t x, std::int64_t n) const { return x0 <= x && x <= x1 && n0 <= n && n <= n1; }
  bool intersects(const Rect& o) const { return x0 <= o.x1 && o.x0 <= x1 && n0 <= o.n1 && o.n0 <= n1; }
  std::int64_t sites() const { return (x1 - x0 + 1) * (n1 - n0 + 1); }
};

// B_L(m) = (r,s)L + [-L,2L] x [0,L]
Rect box(std::int64_t L, Index m = {});
// I_L(m) = (r,s)L + [0,L] x {0}
Rect base_line(std::int64_t L, Index m = {});
// M_k: indices whose B_{Lk}(m) meets B_{Lk1}
std::vector<Index> box_indices(std::int64_t Lk, std::int64_t Lk1);
// perimeter of the continuous rectangle [-L,2L] x [0,L]
inline std::int64_t perimeter(std::int64_t L) { return 8 * L; }
// H_{v,L} = {x <= n v - L}
inline bool in_half_plane(walker::Point y, double v, std::int64_t L) {
  return static_cast<double>(y.x) <= static_cast<double>(y.n) * v - static_cast<double>(L);
}

// ---- bad events

// min over starts x in [x0, x0+width] of X^{(x,n0)}_len - x. Walkers landing on the same
// site at the same time share the field from then on, so they are merged.
struct MinDisplacement {
  std::int64_t value = 0;
  std::int64_t start = 0;  // a start attaining it
};
MinDisplacement min_displacement(const env::Occupancy& occ, const walker::UniformField& U,
                                 const walker::WalkParams& w, std::int64_t x0, std::int64_t n0, std::int64_t width,
                                 std::int64_t len);

// A(m) for box side L and speed v: some start on I_L(m) moves less than v L in L steps
bool bad_event(const env::Occupancy& occ, const walker::UniformField& U, const walker::WalkParams& w,
               std::int64_t L, double v, Index m = {});

struct PkEstimate {
  std::int64_t L = 0;
  double v = 0.0;
  int replicas = 0;
  int hits = 0;
  double p_hat = 0.0;
  double ci_lo = 0.0;  // 95% Wilson
  double ci_hi = 1.0;
};

inline constexpr double kDefaultMaxSiteSteps = 1e9;

// Environment cost of one replica: sites of the occupancy grid plus walker steps
double box_cost(std::int64_t L);

PkEstimate bad_event_monte_carlo(std::int64_t L, double v, double rho, double q, const walker::WalkParams& w,
                                 int replicas, std::uint64_t seed, double max_site_steps = kDefaultMaxSiteSteps);
// p_k at density rho_k with L_k and v_k from the ladder
PkEstimate pk_estimate(const ScaleLadder& ladder, int k, double q, const walker::WalkParams& w, int replicas,
                       std::uint64_t seed, double max_site_steps = kDefaultMaxSiteSteps);

// ---- the three-slow-boxes claim

struct Layer {
  Index m;                   // box whose base line holds the walker at the layer start
  std::int64_t displacement = 0;
};

struct BoxRun {
  int k = 0;
  std::int64_t Lk = 0, Lk1 = 0;
  double vk = 0.0, vk1 = 0.0;
  std::size_t boxes = 0;        // |M_k|
  std::vector<Index> slow;      // m in M_k with A_k(m)
  bool big_bad = false;         // A_{k+1}(0)
  MinDisplacement big;          // worst start on I_{L_{k+1}}
  std::vector<Layer> layers;    // layer decomposition of the worst start's walk
};

BoxRun simulate_box_run(const ScaleLadder& ladder, int k, double rho, double q, const walker::WalkParams& w,
                        std::uint64_t seed, double max_site_steps = kDefaultMaxSiteSteps);

struct SlowBoxVerdict {
  bool holds = true;
  bool vacuous = true;         // A_{k+1}(0) did not occur
  int distinct_layers = 0;     // distinct vertical indices among slow boxes
  bool layers_consistent = true;  // every slow layer of the witness sits in a slow box
};
// Requires the k2large inequality at k itself (PreconditionError otherwise).
SlowBoxVerdict three_slow_boxes_check(const ScaleLadder& ladder, int k, const BoxRun& run);

struct DisplacementReplay {
  std::int64_t total = 0;
  int slow_layers = 0;
  double lower_bound = 0.0;  // -slow L_k + v_k L_k (layers - slow), valid when slow <= 2
  bool big_bad = false;      // total < v_{k+1} L_{k+1}
};
// Sum of per-layer displacements (one per layer of height L_k, floor(L_k^{1/2}) of them).
DisplacementReplay replay_layers(const ScaleLadder& ladder, int k, const std::vector<std::int64_t>& layer_disp);

// ---- tail sum

struct TailSum {
  double beta = 0.0;
  double a = 0.0;
  double alpha0 = 0.0;
  std::int64_t cutoff = 0;
  double lhs = 0.0;        // sum over a < l <= cutoff
  double remainder = 0.0;  // integral bound on the terms beyond cutoff
  bool remainder_certified = false;  // remainder < 1e-12 lhs
  double integral = 0.0;   // int_{alpha0}^inf x^beta e^{-log^{3/2} x} dx
  double D = 0.0;
  double rhs = 0.0;
  bool holds = false;      // lhs + remainder <= rhs
};
TailSum tail_sum_check(double beta, double a, std::optional<std::int64_t> cutoff = std::nullopt);

}  // namespace rwdre::renorm
