#include "rwdre/rng.hpp"

#include <cmath>

namespace rwdre {

std::uint32_t poisson_inverse(double mean, double u) {
  if (mean <= 0.0) return 0;
  double p = std::exp(-mean);
  double cdf = p;
  std::uint32_t k = 0;
  const double cap = mean + 60.0 * std::sqrt(mean) + 200.0;
  while (u >= cdf && k < cap) {
    ++k;
    p *= mean / k;
    cdf += p;
  }
  return k;
}

}  // namespace rwdre
