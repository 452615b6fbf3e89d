#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rwdre/kernel.hpp"
#include "rwdre/stat_tests.hpp"

namespace rwdre::slt {

// Poisson point process on Sigma x [0, infinity) with intensity mu (x) dv, realized
// site by site up to a per-site height cap. Points above the cap are drawn lazily
// from fresh independent layers, so every prefix that has been looked at is exact.
class LabeledPointProcess {
 public:
  LabeledPointProcess() = default;
  LabeledPointProcess(std::vector<std::int64_t> sigma, std::vector<double> mu, double height_cap,
                      std::uint64_t seed);

  std::size_t size() const { return sigma_.size(); }
  const std::vector<std::int64_t>& sigma() const { return sigma_; }
  const std::vector<double>& mu() const { return mu_; }
  double total_mass() const;
  std::uint64_t seed() const { return seed_; }

  // heights at site index s, sorted; only those at or below cap(s) are realized
  const std::vector<double>& heights(std::size_t s) const { return heights_[s]; }
  double cap(std::size_t s) const { return caps_[s]; }
  double min_cap() const;

  // Realize site s up to at least level h (no-op below the current cap).
  void extend(std::size_t s, double h);
  void extend_all(double h);

  // number of realized points with height < level
  std::size_t count_below(std::size_t s, double level) const;
  std::size_t count() const;

  struct Point {
    std::int64_t z;
    double v;
  };
  std::vector<Point> points() const;

 private:
  friend class Sequencer;
  std::vector<std::int64_t> sigma_;
  std::vector<double> mu_;
  std::vector<std::vector<double>> heights_;
  std::vector<double> caps_;
  std::vector<std::uint32_t> layers_;
  std::uint64_t seed_ = 0;
};

LabeledPointProcess sample_point_process(std::vector<std::int64_t> sigma, std::vector<double> mu,
                                         double height_cap, std::uint64_t seed);
// counting measure
LabeledPointProcess sample_point_process(std::vector<std::int64_t> sigma, double height_cap, std::uint64_t seed);

// A density with respect to mu, supported on site indices [first, first + w.size()).
struct Density {
  std::size_t first = 0;
  std::vector<double> w;
  double at(std::size_t s) const { return s >= first && s - first < w.size() ? w[s - first] : 0.0; }
};

// Density of the lazy walk's position after n steps from x, on a Sigma that is the
// contiguous window starting at sigma0. Throws PreconditionError if the support
// leaves the window.
Density kernel_density(const kernel::HeatKernel& k, std::int64_t x, std::int64_t sigma0, std::size_t sigma_size);

struct Draw {
  std::size_t site = 0;  // index into Sigma
  std::int64_t z = 0;    // site label
  std::size_t rank = 0;  // position of the caught point among the heights of its site
  double xi = 0.0;
  bool tie = false;      // another point attained the same ratio; the smallest site index won
};

struct SoftLocalTime {
  std::vector<double> G;  // accumulated xi_l g_l, per site index
  std::vector<double> xi;
  std::vector<std::pair<std::size_t, std::size_t>> consumed;  // (site, rank)
};

// Iterated simulation from one process. Heights stay in original coordinates: a point
// is still free iff its height exceeds G at its site.
class Sequencer {
 public:
  explicit Sequencer(LabeledPointProcess m);
  Draw next(const Density& g);
  const SoftLocalTime& soft_local_time() const { return slt_; }
  const LabeledPointProcess& process() const { return m_; }
  // the process seen from level G: free points shifted down by G at their site
  LabeledPointProcess residual() const;
  std::size_t ties() const { return ties_; }

 private:
  LabeledPointProcess m_;
  SoftLocalTime slt_;
  std::vector<std::size_t> next_free_;  // per site, rank of the lowest free point
  std::size_t ties_ = 0;
};

// Throws PreconditionError unless sum_z g(z) mu(z) = 1 within 1e-12.
void check_density(const LabeledPointProcess& m, const Density& g);

struct OneDraw {
  Draw draw;
  LabeledPointProcess residual;
};
OneDraw simulate_one(const LabeledPointProcess& m, const Density& g);

struct Sequence {
  std::vector<Draw> draws;
  SoftLocalTime slt;
  LabeledPointProcess residual;
  std::size_t ties = 0;
};
Sequence simulate_sequence(const LabeledPointProcess& m, const std::vector<Density>& gs);

struct DominationReport {
  std::size_t replicas = 0;
  double lhs_hat = 0.0;  // P(samples dominate the points below rho, sitewise)
  double rhs_hat = 0.0;  // P(G_J >= rho everywhere)
  double joint_se = 0.0;
  // seeds where G_J >= rho but domination failed; G_J >= rho forces domination, so this is 0
  std::size_t implication_violations = 0;
  bool holds = false;  // lhs_hat >= rhs_hat - 3 joint_se
};

DominationReport domination_check(const std::vector<std::int64_t>& sigma, const std::vector<double>& mu,
                                  const std::vector<Density>& gs, double rho, std::size_t replicas,
                                  std::uint64_t seed);

struct CouplingConfig {
  double q = 0.5;           // laziness of the walks
  int n = 400;
  double rho = 1.0;
  double rho_prime = 0.5;
  double n_factor = 4.0;    // require n >= n_factor L^2
  std::size_t replicas = 1000;
  std::uint64_t seed = 1;
};

struct CouplingReport {
  std::size_t replicas = 0;
  std::size_t h_prime_size = 0;
  stat::Proportion frequency;  // domination on H', Wilson interval at 3 sigma
  double c_integration = 0.0;  // smallest c making sum_j p_n(z, x_j) >= rho (1 - c L log n / sqrt n) on H'
  double c_local = 0.0;        // sup_x sqrt(n) p_n(0, x)
  double exponent_constant = 0.0;  // 2 max(c_integration, c_local)
  double fitted_bound = 0.0;   // 1 - |H'| exp(-(rho - rho') L + exponent_constant rho L^2 log n / sqrt n)
  double chernoff_bound = 0.0; // 1 - sum_{z in H'} e^{rho' L} prod_j (1 + L p_n(x_j, z))^{-1}
  std::int64_t center = 0;
  double mean_G_center = 0.0;      // Monte Carlo mean of G_J at the center of H'
  double mean_G_center_se = 0.0;
  double expected_G_center = 0.0;  // sum_j p_n(x_j, center)
  double integration_lower = 0.0;  // rho (1 - c_integration L log n / sqrt n)
  std::size_t ties = 0;
  bool holds = false;           // frequency upper limit >= fitted bound
  bool holds_chernoff = false;  // frequency upper limit >= chernoff bound
};

// Walkers start at `starts`, which must be rho-dense for the paving of H. H' is the
// set of sites whose n-neighbourhood lies in H.
CouplingReport endpoint_coupling(const std::vector<std::int64_t>& starts, const kernel::Paving& paving,
                                 const std::vector<std::int64_t>& h_prime, const CouplingConfig& cfg);

}  // namespace rwdre::slt
