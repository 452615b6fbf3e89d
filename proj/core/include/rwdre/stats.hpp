#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rwdre/env.hpp"
#include "rwdre/stat_tests.hpp"
#include "rwdre/walker.hpp"

namespace rwdre::stats {

inline constexpr double kDefaultMaxWork = 1e11;

struct EnsembleConfig {
  walker::WalkParams w;
  double rho = 1.0;
  double q = 0.5;
  std::int64_t n = 1000;
  std::size_t replicas = 100;
  std::uint64_t seed = 1;
  double max_work = kDefaultMaxWork;  // guard on estimated_work()
};

// Walker steps plus particle-block updates of the light cone (about rho n^2 / 64 per
// path); the environment is not consulted when p_circ = p_bullet.
double estimated_work(const EnsembleConfig& cfg);

// Positions X_t at the requested times (sorted, within [0, n]) for every replica.
// Replica r uses environment seed hash(seed, r, 0) and field seed hash(seed, r, 1).
std::vector<std::vector<std::int64_t>> sample_positions(const EnsembleConfig& cfg, const std::vector<std::int64_t>& times);

struct EnsembleSummary {
  std::size_t replicas = 0;
  std::int64_t n = 0;
  std::vector<double> X;  // terminal positions
  double v_hat = 0.0;
  double se = 0.0;
  double level = 0.95;
  double ci_lo = 0.0, ci_hi = 0.0;
};

EnsembleSummary summarize_speed(std::vector<double> X, std::int64_t n, double level = 0.95);
EnsembleSummary estimate_speed(const EnsembleConfig& cfg, double level = 0.95);

// v_hat lies in [v_circ ^ v_bullet, v_circ v v_bullet] up to the CI half-width
bool speed_sandwich(const EnsembleSummary& s, const walker::WalkParams& w);

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

// Var(X_n)/n across replicas
Estimate ensemble_sigma2(const std::vector<double>& X, std::int64_t n);
// Per path: sum over `batches` equal batches of (B_i - m v)^2 / (batches m), v the pooled
// mean increment per step; averaged over paths. Paths are X_0..X_n.
Estimate batch_means_sigma2(const std::vector<std::vector<std::int64_t>>& paths, int batches);

// |a - b| / sqrt(se_a^2 + se_b^2)
double joint_z(const Estimate& a, const Estimate& b);

struct CltReport {
  stat::TestResult terminal;                 // (X_n - n v) / (sqrt(n) sigma) vs N(0,1)
  std::vector<double> fractions;             // time fractions t
  std::vector<stat::TestResult> marginals;   // per fraction, on its own third of the replicas
  std::vector<stat::TestResult> pairwise;    // two-sample KS between the marginals (i<j order)
  std::vector<std::int64_t> var_times;
  std::vector<double> var_values;
  stat::LinearFit var_slope;                 // log Var(X_m) against log m
};

CltReport clt_test(const EnsembleConfig& cfg, double v_hat, double sigma_hat,
                   std::vector<double> fractions = {0.25, 0.5, 1.0});

struct BallisticityRow {
  double L = 0.0;
  std::size_t hits = 0;
  double p_hat = 0.0;
  double se = 0.0;
};

struct BallisticityReport {
  double v_star = 0.0;
  std::int64_t horizon = 0;
  std::size_t replicas = 0;
  std::vector<BallisticityRow> rows;
  bool monotone = true;  // p_hat(L') <= p_hat(L) + 2 joint SE for L < L'
  // log p against L over every row, with p = (hits + 1/2) / (replicas + 1) so that rows
  // without hits still count; needs two or more rows
  stat::LinearFit slope_L;
  std::optional<stat::LinearFit> slope_L_nonzero;  // same on raw p_hat, rows with hits only
  std::optional<double> gamma;  // slope of log(-log p_hat) against log log L, rows with 0 < p_hat < 1, L > e
};

// Frequency of {exists m <= horizon: X_m < m v_star - L} for each L.
BallisticityReport ballisticity_probe(const EnsembleConfig& cfg, double v_star, std::vector<double> Ls);

struct CovarianceRow {
  int n = 0;
  std::size_t replicas = 0;
  double cov = 0.0;
  double se = 0.0;
  double theory = 0.0;
  double sqrt_n_cov = 0.0;
  double sqrt_n_cov_se = 0.0;
};

// Cov(1{(0,0) occupied}, 1{(0,n) occupied}) over independent environments.
CovarianceRow covariance_empirical(double rho, double q, int n, std::size_t replicas, std::uint64_t seed);

// ratio of sqrt(n) C(n) between two rows with its delta-method SE
Estimate plateau_ratio(const CovarianceRow& a, const CovarianceRow& b);

// Indicator with a declared space-time support; expected to be non-increasing in the
// particle configuration.
struct Event {
  std::string name;
  env::Box support;
  std::function<bool(const env::Occupancy&)> f;
};

// every site of [a,b] x {n} vacant
Event vacancy_event(std::int64_t a, std::int64_t b, std::int64_t n);
// some site of [a,b] x {n} occupied; non-decreasing, so the probe rejects it
Event occupancy_event(std::int64_t a, std::int64_t b, std::int64_t n);
Event always_event(std::int64_t n);

struct DecouplingConfig {
  double rho = 1.0;
  double q = 0.5;
  std::optional<double> rho_sprinkled;  // default rho (1 + n^{-1/16})
  std::size_t replicas = 10000;
  std::uint64_t seed = 1;
  std::size_t monotone_checks = 64;
};

struct DecouplingReport {
  std::int64_t n = 0;  // time separation of the supports
  double rho = 0.0, rho_sprinkled = 0.0;
  std::size_t replicas = 0;
  // sprinkled comparison: E^{rho'}[f1 f2] against E^{rho'}[f1] E^{rho}[f2]
  double lhs = 0.0, rhs = 0.0, gap = 0.0, gap_se = 0.0;
  bool sprinkled_holds = false;  // gap <= 3 gap_se
  // equal density FKG check
  double cov = 0.0, cov_se = 0.0;
  bool fkg_holds = false;  // cov >= -3 cov_se
};

// f1 must be supported at times <= 0 and f2 at times >= 1; n is the start time of f2's
// support. Throws PreconditionError when the coupling spot-check finds f1 or f2 increasing.
DecouplingReport decoupling_probe(const DecouplingConfig& cfg, const Event& f1, const Event& f2);

}  // namespace rwdre::stats
