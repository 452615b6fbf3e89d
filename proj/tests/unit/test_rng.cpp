#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "rwdre/parallel.hpp"
#include "rwdre/rng.hpp"

using namespace rwdre;

TEST(Rng, HashIsDeterministicAndKeySensitive) {
  EXPECT_EQ(hash_keys(7, {1, 2, 3}), hash_keys(7, {1, 2, 3}));
  EXPECT_NE(hash_keys(7, {1, 2, 3}), hash_keys(7, {1, 3, 2}));
  EXPECT_NE(hash_keys(7, {1, 2}), hash_keys(8, {1, 2}));
  EXPECT_NE(hash_keys(7, {0}), hash_keys(7, {}));
}

TEST(Rng, UniformRanges) {
  Stream s(42);
  for (int i = 0; i < 100000; ++i) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double v = s.uniform_pos();
    ASSERT_GT(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(Rng, BernoulliWordFrequency) {
  for (double p : {0.0, 0.1, 0.3, 0.5, 0.9, 1.0}) {
    BernoulliWord bw(p);
    Stream s(hash_keys(3, {static_cast<std::uint64_t>(p * 1000)}));
    const int words = 20000;
    long ones = 0;
    for (int i = 0; i < words; ++i) ones += std::popcount(bw.draw(s));
    const double n = 64.0 * words;
    const double se = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(ones / n, p, 5 * se + 1e-15) << "p=" << p;
  }
}

TEST(Rng, BernoulliHalfUsesOneWord) {
  BernoulliWord bw(0.5);
  Stream a(9), b(9);
  bw.draw(a);
  b.next();
  EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, PoissonInverseMoments) {
  for (double mean : {0.5, 2.0, 30.0}) {
    Stream s(11);
    const int n = 200000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
      const double k = poisson_inverse(mean, s.uniform());
      sum += k;
      sq += k * k;
    }
    const double m = sum / n;
    EXPECT_NEAR(m, mean, 5 * std::sqrt(mean / n));
    EXPECT_NEAR(sq / n - m * m, mean, 0.05 * mean);
  }
  EXPECT_EQ(poisson_inverse(0.0, 0.99), 0u);
}

TEST(Parallel, IndependentOfThreadCount) {
  std::vector<std::uint64_t> a(1000), b(1000);
  set_threads(1);
  parallel_for(a.size(), [&](std::size_t i) { a[i] = hash_keys(5, {i}); });
  set_threads(4);
  parallel_for(b.size(), [&](std::size_t i) { b[i] = hash_keys(5, {i}); });
  set_threads(0);
  EXPECT_EQ(a, b);
}

TEST(Parallel, PropagatesExceptions) {
  set_threads(3);
  EXPECT_THROW(parallel_for(100, [](std::size_t i) {
                 if (i == 57) throw std::runtime_error("x");
               }),
               std::runtime_error);
  set_threads(0);
}
