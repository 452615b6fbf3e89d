#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace rwdre {

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Keyed hash of a seed and a short list of integer keys. Distinct key tuples give
// (for practical purposes) independent 64-bit outputs.
constexpr std::uint64_t hash_keys(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = mix64(seed + kGamma);
  std::uint64_t i = 1;
  for (std::uint64_t k : keys) {
    h = mix64(h ^ mix64(k + i * kGamma));
    ++i;
  }
  return h;
}

constexpr std::uint64_t as_key(std::int64_t v) noexcept { return static_cast<std::uint64_t>(v); }

inline double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Counter-based stream: output k is mix64(key + (k+1) * gamma).
class Stream {
 public:
  explicit constexpr Stream(std::uint64_t key) noexcept : state_(key) {}
  constexpr std::uint64_t next() noexcept {
    state_ += kGamma;
    return mix64(state_);
  }
  double uniform() noexcept { return to_unit(next()); }
  // Uniform in (0,1], safe for logarithms.
  double uniform_pos() noexcept { return 1.0 - uniform(); }
  double exponential() noexcept { return -std::log(uniform_pos()); }

 private:
  std::uint64_t state_;
};

// 64 independent Bernoulli(p) bits, exact to the 53-bit binary expansion of p.
// Lanes compare a random binary fraction with p digit by digit.
class BernoulliWord {
 public:
  explicit BernoulliWord(double p);
  std::uint64_t draw(Stream& s) const noexcept;
  double p() const noexcept { return p_; }

 private:
  double p_;
  std::uint64_t mant_ = 0;  // digits of p after the binary point, msb first
  int ndigits_ = 0;
  bool one_ = false;
};

inline BernoulliWord::BernoulliWord(double p) : p_(p) {
  if (p >= 1.0) {
    one_ = true;
    return;
  }
  if (p <= 0.0) return;
  int e = 0;
  double m = std::frexp(p, &e);  // p = m * 2^e, m in [0.5,1)
  // p = 0.000..1xxxx with -e leading zeros
  std::uint64_t mm = static_cast<std::uint64_t>(std::ldexp(m, 53));
  int lead = -e;
  if (lead + 53 > 64) {
    // keep only the 64 most significant digits
    int drop = lead + 53 - 64;
    mm >>= drop;
    mant_ = mm;
    ndigits_ = 64;
  } else {
    mant_ = mm << (64 - 53 - lead);
    ndigits_ = lead + 53;
  }
  while (ndigits_ > 0 && ((mant_ >> (64 - ndigits_)) & 1ULL) == 0) --ndigits_;
}

inline std::uint64_t BernoulliWord::draw(Stream& s) const noexcept {
  if (one_) return ~0ULL;
  std::uint64_t result = 0;
  std::uint64_t undecided = ~0ULL;
  for (int j = 0; j < ndigits_ && undecided; ++j) {
    const bool digit = (mant_ >> (63 - j)) & 1ULL;
    const std::uint64_t r = s.next();
    if (digit) {
      result |= undecided & ~r;
      undecided &= r;
    } else {
      undecided &= ~r;
    }
  }
  // remaining digits of p are zero, so undecided lanes satisfy U >= p
  return result;
}

// Poisson(mean) by inversion of one uniform; mean is bounded so the recursion
// starting at e^{-mean} stays representable.
std::uint32_t poisson_inverse(double mean, double u);

}  // namespace rwdre
