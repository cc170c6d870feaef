#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "spider/rng.hpp"

using namespace spider;

TEST(CounterRng, MatchesReferenceMix) {
  // splitmix64 reference outputs for state 0 after one increment.
  EXPECT_EQ(counter_draw(0, 0), 0xE220A8397B1DCDAFULL);
  for (std::uint64_t k = 0; k < 50; ++k) {
    EXPECT_EQ(counter_uniform(99, k), oracle::unit(99, k));
  }
}

TEST(CounterRng, UniformIsOpenInterval) {
  for (std::uint64_t k = 0; k < 10000; ++k) {
    const double u = counter_uniform(3, k);
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(CounterRng, NormalMoments) {
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = counter_normal(17, static_cast<std::uint64_t>(i));
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(CounterRng, DerivedSeedsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(7, i));
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(Rng, BelowAndBetweenStayInRange) {
  Rng rng(1);
  std::set<int> hits;
  for (int i = 0; i < 2000; ++i) {
    EXPECT_LT(rng.below(7), 7u);
    const int v = rng.between(-2, 2);
    EXPECT_GE(v, -2);
    EXPECT_LE(v, 2);
    hits.insert(v);
  }
  EXPECT_EQ(hits.size(), 5u);
}

TEST(Rng, WeightedSkipsZeroWeights) {
  Rng rng(2);
  const std::array<double, 3> w = {0.0, 1.0, 0.0};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(rng.weighted(w), 1u);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}
