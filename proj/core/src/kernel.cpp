#include "rwdre/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rwdre/error.hpp"

namespace rwdre::kernel {

double StepDistribution::mass(int step) const {
  switch (step) {
    case -1: return minus;
    case 0: return zero;
    case 1: return plus;
    default: return 0.0;
  }
}

StepDistribution step_distribution(double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("q must lie in [0,1]");
  StepDistribution s;
  s.q = q;
  s.zero = q;
  s.minus = s.plus = 0.5 * (1.0 - q);
  return s;
}

HeatKernel::HeatKernel(double q, int n, std::vector<double> values)
    : q_(q), n_(n), values_(std::move(values)) {}

double HeatKernel::operator()(std::int64_t x) const {
  if (x < -n_ || x > n_) return 0.0;
  return values_[static_cast<std::size_t>(x + n_)];
}

double HeatKernel::sum() const {
  // pairwise-ish: sum small tails first
  std::vector<double> v = values_;
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double HeatKernel::mass_in(std::int64_t a, std::int64_t b) const {
  a = std::max<std::int64_t>(a, -n_);
  b = std::min<std::int64_t>(b, n_);
  double s = 0.0;
  for (std::int64_t x = a; x <= b; ++x) s += (*this)(x);
  return s;
}

namespace {

// p_{k} from p_{k-1} in gather form; the two side terms are added before scaling so
// the result stays exactly symmetric in floating point
std::vector<double> step_forward(const std::vector<double>& cur, const StepDistribution& s) {
  const int w = static_cast<int>(cur.size());
  std::vector<double> nxt(cur.size() + 2, 0.0);
  for (int j = 0; j < w + 2; ++j) {
    const double a = j < w ? cur[j] : 0.0;
    const double b = j >= 2 ? cur[j - 2] : 0.0;
    const double c = (j >= 1 && j - 1 < w) ? cur[j - 1] : 0.0;
    nxt[j] = s.plus * (a + b) + s.zero * c;
  }
  return nxt;
}

}  // namespace

HeatKernel heat_kernel(double q, int n) {
  const StepDistribution s = step_distribution(q);
  if (n < 0) throw ParameterError("n must be >= 0");
  std::vector<double> cur{1.0};
  for (int k = 1; k <= n; ++k) cur = step_forward(cur, s);
  return HeatKernel(q, n, std::move(cur));
}

std::vector<Rational> heat_kernel_exact(double q, int n) {
  step_distribution(q);
  if (n < 0 || n > 64) throw ParameterError("exact kernel supports 0 <= n <= 64");
  int e = 0;
  const double m = std::frexp(q, &e);
  const auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
  Rational qr(mant);
  const int shift = 53 - e;
  if (shift >= 0) {
    qr /= Rational(boost::multiprecision::cpp_int(1) << shift);
  } else {
    qr *= Rational(boost::multiprecision::cpp_int(1) << (-shift));
  }
  const Rational side = (Rational(1) - qr) / 2;
  std::vector<Rational> cur{Rational(1)};
  for (int k = 1; k <= n; ++k) {
    std::vector<Rational> nxt(2 * k + 1, Rational(0));
    for (int i = 0; i < 2 * k - 1; ++i) {
      nxt[i] += cur[i] * side;
      nxt[i + 1] += cur[i] * qr;
      nxt[i + 2] += cur[i] * side;
    }
    cur.swap(nxt);
  }
  return cur;
}

std::vector<double> convolve(const HeatKernel& a, const HeatKernel& b) {
  const int n = a.n() + b.n();
  std::vector<double> out(2 * n + 1, 0.0);
  for (int y = -a.n(); y <= a.n(); ++y) {
    const double py = a(y);
    if (py == 0.0) continue;
    for (int z = -b.n(); z <= b.n(); ++z) out[y + z + n] += py * b(z);
  }
  return out;
}

namespace {

bool trend_bounded(const std::vector<BoundRow>& rows, double BoundRow::*field) {
  const int nm = static_cast<int>(rows.size());
  if (nm < 4) return true;
  double early = 0.0, late = 0.0;
  for (int n = 1; n <= nm; ++n) {
    const double v = rows[n - 1].*field;
    if (n > nm / 2) late = std::max(late, v);
    else if (n >= nm / 4) early = std::max(early, v);
  }
  return late <= 1.05 * early + 1e-300;
}

}  // namespace

BoundReport kernel_bound_report(double q, int n_max, double c) {
  step_distribution(q);
  if (n_max < 2) throw ParameterError("n_max must be >= 2");
  BoundReport r;
  r.q = q;
  r.n_max = n_max;
  r.c = c;
  r.hypotheses_ok = q > 0.0 && q < 1.0;
  const StepDistribution s = step_distribution(q);
  std::vector<double> cur{1.0};
  for (int n = 1; n <= n_max; ++n) {
    cur = step_forward(cur, s);
    BoundRow row;
    row.n = n;
    const double sq = std::sqrt(static_cast<double>(n));
    double sup = 0.0, smooth = 0.0, tail = 0.0;
    const double cut = sq * std::log(static_cast<double>(n));
    for (int x = -n; x <= n; ++x) {
      const double p = cur[x + n];
      sup = std::max(sup, p);
      if (x + 2 <= n) smooth = std::max(smooth, std::fabs(p - cur[x + 2 + n]) * n / 2.0);
      if (std::fabs(static_cast<double>(x)) > cut) tail += p;
    }
    const double ln = std::log(static_cast<double>(n));
    row.sup_scaled = sup * sq;
    row.smooth_scaled = smooth;
    row.tail = tail;
    row.tail_scaled = tail * std::exp(c * ln * ln);
    for (double v : {row.sup_scaled, row.smooth_scaled, row.tail_scaled})
      if (!std::isfinite(v)) r.all_finite = false;
    r.C_local = std::max(r.C_local, row.sup_scaled);
    r.C_smooth = std::max(r.C_smooth, row.smooth_scaled);
    r.C_tail = std::max(r.C_tail, row.tail_scaled);
    r.rows.push_back(row);
  }
  r.local_bounded = trend_bounded(r.rows, &BoundRow::sup_scaled);
  r.smooth_bounded = trend_bounded(r.rows, &BoundRow::smooth_scaled);
  r.tail_bounded = trend_bounded(r.rows, &BoundRow::tail_scaled);
  if (!r.hypotheses_ok) r.note = "q outside (0,1): the heat-kernel bounds are not asserted";
  return r;
}

std::vector<std::int64_t> interval_sites(std::int64_t a, std::int64_t b) {
  std::vector<std::int64_t> v;
  for (std::int64_t x = a; x <= b; ++x) v.push_back(x);
  return v;
}

Paving::Paving(std::vector<std::int64_t> H, int L) : H_(std::move(H)), L_(L), offset_(0) {
  std::sort(H_.begin(), H_.end());
  H_.erase(std::unique(H_.begin(), H_.end()), H_.end());
  offset_ = H_.empty() ? 0 : H_.front();
  build();
}

Paving::Paving(std::vector<std::int64_t> H, int L, std::int64_t offset)
    : H_(std::move(H)), L_(L), offset_(offset) {
  std::sort(H_.begin(), H_.end());
  H_.erase(std::unique(H_.begin(), H_.end()), H_.end());
  build();
}

std::int64_t Paving::segment_of(std::int64_t x) const {
  const std::int64_t d = x - offset_;
  return d >= 0 ? d / L_ : -((-d + L_ - 1) / L_);
}

void Paving::build() {
  if (L_ < 1) throw ParameterError("paving length L must be >= 1");
  for (std::int64_t x : H_) {
    const std::int64_t i = segment_of(x);
    if (indices_.empty() || indices_.back() != i) indices_.push_back(i);
  }
}

void check_dense(const Paving& paving, const std::vector<std::int64_t>& points, double rho) {
  std::vector<std::int64_t> pts = points;
  std::sort(pts.begin(), pts.end());
  for (std::int64_t i : paving.indices()) {
    const std::int64_t a = paving.segment_start(i);
    const std::int64_t b = a + paving.L();
    const auto cnt = std::lower_bound(pts.begin(), pts.end(), b) - std::lower_bound(pts.begin(), pts.end(), a);
    if (static_cast<double>(cnt) < rho * paving.L()) {
      std::ostringstream os;
      os << "points are not rho-dense: segment " << i << " = [" << a << "," << b << ") holds " << cnt
         << " points, needs " << rho * paving.L();
      throw PreconditionError(os.str());
    }
  }
}

PavingCheck paving_integral_check(const HeatKernel& k, const Paving& paving,
                                  const std::vector<std::int64_t>& points, double rho, double c) {
  if (k.n() < 1) throw ParameterError("paving check needs n >= 1");
  check_dense(paving, points, rho);
  PavingCheck r;
  std::vector<std::int64_t> pts = points;
  std::sort(pts.begin(), pts.end());
  for (std::int64_t x : pts) r.lhs += k(x);
  for (std::int64_t x : paving.target()) r.target_mass += k(x);
  const double n = k.n();
  const double err = paving.L() * std::log(n) / std::sqrt(n);
  r.rhs = rho * (r.target_mass - c * err);
  r.holds = r.lhs >= r.rhs;
  if (rho > 0 && err > 0) r.fitted_c = std::max(0.0, (r.target_mass - r.lhs / rho) / err);
  return r;
}

}  // namespace rwdre::kernel
