#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

#include "oracle_values.hpp"
#include "roost/reduce.hpp"
#include "roost/rng.hpp"

using namespace roost;

namespace {

std::vector<double> multiples_of_ten_e() {
  const double x = 10.0 * std::numbers::e;
  std::vector<double> v;
  for (int k = 1; k <= 8; ++k) v.push_back(k * x);
  return v;
}

const auto add = [](double a, double b) { return a + b; };

/// Runs distributed_reduce over `values` on M threaded workers; returns the
/// root's result.
template <class T, class Combine>
T reduce_on(int m, const std::vector<T>& values, Combine combine) {
  const WorkerAssignment owners(static_cast<int>(values.size()), m);
  std::optional<T> result;
  std::mutex mutex;
  run_threaded(m, [&](Transport& t) {
    const int me = t.rank();
    std::vector<T> local(values.begin() + owners.first_leaf(me) - 1,
                         values.begin() + owners.end_leaf(me) - 1);
    auto r = distributed_reduce<T>(t, owners, std::span<const T>(local), combine, 8);
    if (r) {
      std::lock_guard lock(mutex);
      result = r;
    }
  });
  return *result;
}

}  // namespace

TEST(Reduce, TreeSumOfMultiplesOfTenE) {
  const auto v = multiples_of_ten_e();
  EXPECT_EQ(reduce_tree(std::span<const double>(v), add), oracle::kTreeSum);
}

TEST(Reduce, LeftFoldDiffersByOneUlp) {
  const auto v = multiples_of_ten_e();
  const double fold = left_fold(std::span<const double>(v), add);
  const double tree = reduce_tree(std::span<const double>(v), add);
  EXPECT_EQ(fold, oracle::kFoldSum);
  EXPECT_EQ(std::nextafter(tree, INFINITY), fold);
}

TEST(Reduce, SingleValueIsIdentity) {
  const std::vector<double> one{3.25};
  EXPECT_EQ(reduce_tree(std::span<const double>(one), add), 3.25);
  EXPECT_EQ(left_fold(std::span<const double>(one), add), 3.25);
}

TEST(Reduce, EmptyInputIsAnError) {
  const std::vector<double> none;
  EXPECT_THROW(reduce_tree(std::span<const double>(none), add), ArgumentError);
  EXPECT_THROW(left_fold(std::span<const double>(none), add), ArgumentError);
}

TEST(Reduce, OddLeftoverIsPromoted) {
  // Five leaves: ((a b)(c d)) e.
  const std::vector<std::string> v{"a", "b", "c", "d", "e"};
  auto cat = [](const std::string& l, const std::string& r) { return "(" + l + r + ")"; };
  EXPECT_EQ(reduce_tree(std::span<const std::string>(v), cat), "(((ab)(cd))e)");
  EXPECT_EQ(left_fold(std::span<const std::string>(v), cat), "((((ab)c)d)e)");
}

TEST(Reduce, IntegerPayloadsAgreeExactly) {
  std::vector<std::int64_t> v(37);
  std::iota(v.begin(), v.end(), -10);
  const auto plus = [](std::int64_t a, std::int64_t b) { return a + b; };
  const auto sum = std::accumulate(v.begin(), v.end(), std::int64_t{0});
  EXPECT_EQ(reduce_tree(std::span<const std::int64_t>(v), plus), sum);
  EXPECT_EQ(left_fold(std::span<const std::int64_t>(v), plus), sum);
  EXPECT_EQ(reduce_on(5, v, plus), sum);
}

TEST(Reduce, AssignmentIsContiguousBlocks) {
  for (int n = 1; n <= 20; ++n)
    for (int m = 1; m <= n; ++m) {
      const WorkerAssignment a(n, m);
      int covered = 0;
      for (int w = 1; w <= m; ++w) {
        EXPECT_GE(a.count(w), 1);
        for (int i = a.first_leaf(w); i < a.end_leaf(w); ++i) {
          EXPECT_EQ(a.owner(i), w);
          EXPECT_EQ((i - 1) * m / n, w - 1);
          ++covered;
        }
      }
      EXPECT_EQ(covered, n);
    }
  EXPECT_THROW(WorkerAssignment(4, 5), ArgumentError);
  EXPECT_THROW(WorkerAssignment(4, 0), ArgumentError);
}

TEST(Reduce, DistributedMatchesTreeForPublishedInput) {
  const auto v = multiples_of_ten_e();
  for (int m : {1, 2, 4, 8}) EXPECT_EQ(reduce_on(m, v, add), oracle::kTreeSum) << "M = " << m;
}

TEST(Reduce, DistributedIsBitInvariantAcrossWorkerCounts) {
  auto rng = new_rng(31);
  for (int n = 1; n <= 64; n += (n < 12 ? 1 : 13)) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = (rng.next_unit_f64() - 0.5) * std::pow(10.0, 12.0 * rng.next_unit_f64());
    const double expected = reduce_tree(std::span<const double>(v), add);
    for (int m = 1; m <= n; m += (m < 4 ? 1 : 5))
      ASSERT_EQ(std::bit_cast<std::uint64_t>(reduce_on(m, v, add)), std::bit_cast<std::uint64_t>(expected))
          << "N = " << n << " M = " << m;
  }
}

TEST(Reduce, MismatchedLeafCountIsProtocolError) {
  EXPECT_THROW(run_threaded(2,
                            [](Transport& t) {
                              const WorkerAssignment owners(4, 2);
                              std::vector<double> local(t.rank() == 1 ? 1 : 2, 1.0);
                              distributed_reduce<double>(t, owners, std::span<const double>(local), add, 8);
                            }),
               ProtocolError);
}

TEST(Reduce, SingleLeafSingleWorker) {
  SequentialTransport t;
  const std::vector<double> one{42.0};
  auto r = distributed_reduce<double>(t, WorkerAssignment(1, 1), std::span<const double>(one), add, 8);
  ASSERT_TRUE(r);
  EXPECT_EQ(*r, 42.0);
}
