#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "edet/rng.hpp"

using namespace edet;

TEST(Rng, EngineIsStandardMt19937_64) {
  // The standard requires the 10000th output of a default-seeded engine.
  std::mt19937_64 ref;
  ref.discard(9999);
  EXPECT_EQ(ref(), 9981545732273789042ULL);
  Rng r(std::mt19937_64::default_seed);
  for (int i = 0; i < 9999; ++i) r.next_u64();
  EXPECT_EQ(r.next_u64(), 9981545732273789042ULL);
}

TEST(Rng, UniformInHalfOpenUnit) {
  Rng r(1);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_GE(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_NEAR(sum / 100000, 0.5, 0.01);
}

TEST(Rng, NormalMoments) {
  Rng r(2);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = r.normal();
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, IndexCoversRangeUniformly) {
  Rng r(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[r.index(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Rng, PoissonMean) {
  Rng r(4);
  double s = 0.0;
  for (int i = 0; i < 20000; ++i) s += static_cast<double>(r.poisson(12.0));
  EXPECT_NEAR(s / 20000, 12.0, 0.15);
}

TEST(Seeds, DeriveIsPureAndNameSensitive) {
  EXPECT_EQ(derive_seed(7, "data"), derive_seed(7, "data"));
  EXPECT_NE(derive_seed(7, "data"), derive_seed(7, "split"));
  EXPECT_NE(derive_seed(7, "data"), derive_seed(8, "data"));
  EXPECT_NE(derive_seed(7, "ood", 0), derive_seed(7, "ood", 1));
}

TEST(Seeds, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Shuffle, PermutationAndDeterminism) {
  std::vector<int> a(50);
  for (int i = 0; i < 50; ++i) a[i] = i;
  auto b = a;
  Rng r1(5), r2(5);
  shuffle(a, r1);
  shuffle(b, r2);
  EXPECT_EQ(a, b);
  std::set<int> s(a.begin(), a.end());
  EXPECT_EQ(s.size(), 50u);
}

TEST(SampleWithoutReplacement, DistinctSortedInRange) {
  Rng r(6);
  const auto v = sample_without_replacement(100, 30, r);
  ASSERT_EQ(v.size(), 30u);
  EXPECT_TRUE(std::is_sorted(v.begin(), v.end()));
  EXPECT_EQ(std::set<std::size_t>(v.begin(), v.end()).size(), 30u);
  EXPECT_LT(v.back(), 100u);
}
