#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace rwdre::kernel {

// One step of the lazy walk: hold with probability q, else +-1 with equal probability.
struct StepDistribution {
  double q = 0.0;
  double minus = 0.0;
  double zero = 0.0;
  double plus = 0.0;
  double mass(int step) const;
};

StepDistribution step_distribution(double q);

// p_n(0,x) on the support [-n,n].
class HeatKernel {
 public:
  HeatKernel(double q, int n, std::vector<double> values);
  double q() const { return q_; }
  int n() const { return n_; }
  // p_n(0,x), zero outside [-n,n]
  double operator()(std::int64_t x) const;
  // p_n(x,x') by translation invariance
  double between(std::int64_t x, std::int64_t xp) const { return (*this)(xp - x); }
  const std::vector<double>& values() const { return values_; }
  double sum() const;
  // P_0(Z_n in [a,b])
  double mass_in(std::int64_t a, std::int64_t b) const;

 private:
  double q_;
  int n_;
  std::vector<double> values_;
};

HeatKernel heat_kernel(double q, int n);

using Rational = boost::multiprecision::cpp_rational;

// Exact rational kernel for n <= 64; q is converted exactly from its binary value.
std::vector<Rational> heat_kernel_exact(double q, int n);

// Direct convolution p_{m+n} = p_m * p_n, used by the semigroup property.
std::vector<double> convolve(const HeatKernel& a, const HeatKernel& b);

struct BoundRow {
  int n = 0;
  double sup_scaled = 0.0;     // sup_x p_n(0,x) sqrt(n)
  double smooth_scaled = 0.0;  // max |p_n(x)-p_n(x+2)| n / 2
  double tail = 0.0;           // P_0(|Z_n| > sqrt(n) log n)
  double tail_scaled = 0.0;    // tail * exp(c log^2 n)
};

struct BoundReport {
  double q = 0.0;
  int n_max = 0;
  double c = 0.0;
  std::vector<BoundRow> rows;  // n = 1..n_max
  double C_local = 0.0;
  double C_smooth = 0.0;
  double C_tail = 0.0;
  bool hypotheses_ok = true;  // q in (0,1)
  bool local_bounded = true;
  bool smooth_bounded = true;
  bool tail_bounded = true;
  bool all_finite = true;
  std::string note;
};

// Empirical constants for the three heat-kernel bounds. "bounded" means the maximum
// over (n_max/2, n_max] does not exceed the maximum over [n_max/4, n_max/2] by more
// than 5%.
BoundReport kernel_bound_report(double q, int n_max, double c);

// Segments C_i = [0,L) + L i + offset covering a target set H.
class Paving {
 public:
  Paving(std::vector<std::int64_t> H, int L);
  Paving(std::vector<std::int64_t> H, int L, std::int64_t offset);
  int L() const { return L_; }
  std::int64_t offset() const { return offset_; }
  const std::vector<std::int64_t>& indices() const { return indices_; }
  const std::vector<std::int64_t>& target() const { return H_; }
  std::int64_t segment_start(std::int64_t i) const { return offset_ + L_ * i; }
  // index of the segment containing x (floor division)
  std::int64_t segment_of(std::int64_t x) const;

 private:
  void build();
  std::vector<std::int64_t> H_;
  int L_;
  std::int64_t offset_;
  std::vector<std::int64_t> indices_;
};

std::vector<std::int64_t> interval_sites(std::int64_t a, std::int64_t b);

// Throws PreconditionError naming the first segment with fewer than rho L points.
void check_dense(const Paving& paving, const std::vector<std::int64_t>& points, double rho);

struct PavingCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  double target_mass = 0.0;  // P_0(Z_n in H)
  double fitted_c = 0.0;     // smallest c >= 0 for which the inequality holds
};

PavingCheck paving_integral_check(const HeatKernel& k, const Paving& paving,
                                  const std::vector<std::int64_t>& points, double rho, double c);

}  // namespace rwdre::kernel
