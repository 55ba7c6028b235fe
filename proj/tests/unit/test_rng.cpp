#include <gtest/gtest.h>

#include <set>

#include "oracle_values.hpp"
#include "roost/rng.hpp"

using roost::keyed_rng;
using roost::new_rng;
using roost::SplittableRng;

TEST(Rng, FirstSixteenOutputsMatchOracle) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto g = new_rng(s);
    for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(g.next_u64(), oracle::kStream[s][k]) << "seed " << s << " draw " << k;
  }
}

TEST(Rng, SuccessiveSplitsMatchOracle) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto g = new_rng(s);
    for (std::size_t k = 0; k < 3; ++k) {
      auto child = g.split();
      EXPECT_EQ(child.gamma(), oracle::kSplitGamma[s][k]);
      EXPECT_EQ(child.next_u64(), oracle::kSplitFirst[s][k]);
    }
  }
}

TEST(Rng, SameSeedSameSequence) {
  auto a = new_rng(7);
  auto b = new_rng(7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StateAdvancesByGamma) {
  auto g = new_rng(123);
  for (int i = 0; i < 10; ++i) {
    const auto before = g.seed();
    g.next_u64();
    EXPECT_EQ(g.seed(), before + g.gamma());
  }
  EXPECT_EQ(g.gamma() % 2, 1U);
  EXPECT_EQ(SplittableRng(5, 4).gamma(), 5U);
}

TEST(Rng, UnitDrawIsTop53Bits) {
  auto a = new_rng(99);
  auto b = new_rng(99);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.next_unit_f64();
    EXPECT_EQ(u, static_cast<double>(b.next_u64() >> 11) * 0x1.0p-53);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Rng, UnitDrawMeanIsHalf) {
  auto g = new_rng(2024);
  double sum = 0.0;
  constexpr int n = 1'000'000;
  for (int i = 0; i < n; ++i) sum += g.next_unit_f64();
  EXPECT_NEAR(sum / n, 0.5, 0.01);
}

TEST(Rng, ChildUnaffectedByParentUse) {
  auto parent_a = new_rng(11);
  auto parent_b = new_rng(11);
  auto child_a = parent_a.split();
  auto child_b = parent_b.split();
  for (int i = 0; i < 50; ++i) parent_b.next_u64();
  for (int i = 0; i < 100; ++i) {
    ASSERT_EQ(child_a.next_u64(), child_b.next_u64());
    if (i % 3 == 0) parent_a.next_u64();
  }
}

TEST(Rng, SplitChildrenDiffer) {
  auto g = new_rng(3);
  auto c1 = g.split();
  auto c2 = g.split();
  EXPECT_NE(c1, c2);
  EXPECT_NE(c1.next_u64(), c2.next_u64());
}

TEST(Rng, ManyChildrenFirstDrawMeanIsHalf) {
  auto g = new_rng(5);
  double sum = 0.0;
  constexpr int n = 10'000;
  for (int i = 0; i < n; ++i) sum += g.split().next_unit_f64();
  EXPECT_NEAR(sum / n, 0.5, 0.02);
}

TEST(Rng, KeyedMatchesOracle) {
  EXPECT_EQ(keyed_rng(1, 3, 2).next_u64(), oracle::kKeyed_1_3_2);
  EXPECT_EQ(keyed_rng(1, 0, 0).next_u64(), oracle::kKeyed_1_0_0);
  EXPECT_EQ(keyed_rng(1, 0, 1).next_u64(), oracle::kKeyed_1_0_1);
}

TEST(Rng, KeyedIsPure) {
  auto a = keyed_rng(1, 3, 2);
  auto b = keyed_rng(1, 3, 2);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, KeyedNoCollisionsOverRandomKeys) {
  auto keys = new_rng(77);
  std::set<std::pair<std::uint64_t, std::uint64_t>> pairs;
  std::set<std::uint64_t> outputs;
  for (int i = 0; i < 10'000; ++i) {
    const auto k1 = keys.next_u64();
    const auto k2 = keys.next_u64();
    if (!pairs.insert({k1, k2}).second) continue;
    outputs.insert(keyed_rng(42, k1, k2).next_u64());
  }
  EXPECT_EQ(outputs.size(), pairs.size());
}

TEST(Rng, IsConstexpr) {
  constexpr auto first = [] {
    auto g = new_rng(0);
    return g.next_u64();
  }();
  static_assert(first == oracle::kStream[0][0]);
  SUCCEED();
}
