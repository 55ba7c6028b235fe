#include <gtest/gtest.h>

#include <algorithm>
#include <mutex>
#include <numeric>

#include "oracle_values.hpp"
#include "roost/swap.hpp"

using namespace roost;

namespace {

struct SwapRun {
  // chains[s][r - 1]: chain of replica r after scan s + 1.
  std::vector<std::vector<int>> chains;
  // directories[s]: full directory gathered on rank 1 after scan s + 1.
  std::vector<std::vector<int>> directories;
  std::vector<SwapDecision> decisions;
};

/// Runs `scans` communication phases (no exploration) for N replicas on M
/// threaded workers. Replica r starts at chain r with state {offset * r}.
SwapRun run_swaps(int n, int m, int scans, std::optional<double> forced, std::uint64_t seed = 1,
                  double offset = 0.3) {
  auto targets = mvn_target(1, 3.0);
  const Path path = Path::log_linear(targets.reference, targets.target);
  const Schedule schedule = Schedule::equally_spaced(n);
  const WorkerAssignment owners(n, m);

  SwapRun out;
  out.chains.assign(static_cast<std::size_t>(scans), std::vector<int>(static_cast<std::size_t>(n)));
  out.directories.resize(static_cast<std::size_t>(scans));
  std::mutex mutex;

  auto body = [&](Transport& net) {
    const int me = net.rank();
    PermutedDistributedArray dir(owners, me);
    std::vector<Replica> local;
    for (int r = owners.first_leaf(me); r < owners.end_leaf(me); ++r) {
      Replica rep;
      rep.state = {offset * r};
      rep.chain = r;
      rep.replica_index = r;
      rep.recorders.reset_round(n);
      local.push_back(std::move(rep));
    }
    SwapContext ctx{net, dir, path, schedule, seed, forced};
    for (int s = 1; s <= scans; ++s) {
      const auto t = static_cast<std::uint64_t>(s);
      auto d = communicate(local, t, ctx);
      auto full = gather_directory(net, dir, protocol_step(t, phase::kGatherDirectory));
      std::lock_guard lock(mutex);
      for (const auto& rep : local)
        out.chains[static_cast<std::size_t>(s - 1)][static_cast<std::size_t>(rep.replica_index - 1)] = rep.chain;
      out.decisions.insert(out.decisions.end(), d.begin(), d.end());
      if (me == 1) out.directories[static_cast<std::size_t>(s - 1)] = std::move(full);
    }
  };
  if (m == 1) {
    SequentialTransport net;
    body(net);
  } else {
    run_threaded(m, body);
  }
  std::sort(out.decisions.begin(), out.decisions.end(), [](const auto& a, const auto& b) {
    return std::pair(a.t, a.lower_chain) < std::pair(b.t, b.lower_chain);
  });
  return out;
}

/// chain -> replica from replica -> chain.
std::vector<int> invert(const std::vector<int>& chains) {
  std::vector<int> inv(chains.size());
  for (std::size_t r = 0; r < chains.size(); ++r) inv[static_cast<std::size_t>(chains[r] - 1)] = static_cast<int>(r + 1);
  return inv;
}

bool is_permutation_of_1_to_n(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != static_cast<int>(i + 1)) return false;
  return true;
}

}  // namespace

TEST(Swap, SwapSetAlternatesParity) {
  EXPECT_EQ(swap_set(1, 5), (std::vector<int>{1, 3}));
  EXPECT_EQ(swap_set(2, 5), (std::vector<int>{2, 4}));
  EXPECT_EQ(swap_set(1, 4), (std::vector<int>{1, 3}));
  EXPECT_EQ(swap_set(2, 4), (std::vector<int>{2}));
  EXPECT_EQ(swap_set(1, 2), (std::vector<int>{1}));
  EXPECT_TRUE(swap_set(2, 2).empty());
  EXPECT_THROW(swap_set(0, 4), ArgumentError);
}

TEST(Swap, PartnersAreSymmetric) {
  for (int n = 2; n <= 9; ++n)
    for (std::uint64_t t = 1; t <= 4; ++t)
      for (int c = 1; c <= n; ++c)
        if (auto p = swap_partner(c, t, n)) {
          EXPECT_EQ(swap_partner(*p, t, n), c);
          EXPECT_EQ(std::abs(*p - c), 1);
        }
}

TEST(Swap, AlphaFromDensities) {
  auto flat = [](std::span<const double>) { return 0.0; };
  const std::vector<double> a{0.0};
  const std::vector<double> b{2.0};
  EXPECT_EQ(swap_alpha(flat, flat, a, b), 1.0);

  auto gauss = [](std::span<const double> x) { return -0.5 * x[0] * x[0]; };
  // l_i(x_j) + l_j(x_i) - l_i(x_i) - l_j(x_j) with l_i flat, l_j gaussian, x_i = 0, x_j = 2:
  // 0 + 0 - 0 - (-2) = 2 -> accept with probability 1; reversed roles give exp(-2).
  EXPECT_EQ(swap_alpha(flat, gauss, a, b), 1.0);
  EXPECT_DOUBLE_EQ(swap_alpha(flat, gauss, b, a), std::exp(-2.0));

  auto support = [](std::span<const double> x) { return x[0] < 1.0 ? 0.0 : kNegInf; };
  EXPECT_EQ(swap_alpha(support, flat, a, b), 0.0);
  auto nan = [](std::span<const double>) { return std::nan(""); };
  EXPECT_THROW(swap_alpha(nan, flat, a, b), KernelError);
}

TEST(Swap, TagsAreInjectiveAndBounded) {
  EXPECT_EQ(tag(0, 0, 0), 0U);
  EXPECT_EQ(tag(1, 2, 3), (std::uint64_t{1} << 24) | (2U << 12) | 3U);
  EXPECT_EQ(tag(std::uint64_t{1} << 40, 5, 6), tag(0, 5, 6));
  EXPECT_NE(tag(1, 4095, 1), tag(2, 0, 1));
  EXPECT_THROW(tag(1, 4096, 1), ArgumentError);
  EXPECT_THROW(tag(1, 1, 4096), ArgumentError);
}

TEST(Swap, DirectoryRejectsDoubleWriteInOneStep) {
  const WorkerAssignment owners(4, 1);
  PermutedDistributedArray dir(owners, 1);
  permuted_set(dir, 2, 1, 7);
  EXPECT_THROW(permuted_set(dir, 2, 1, 7), ProtocolError);
  EXPECT_NO_THROW(permuted_set(dir, 2, 1, 8));
  EXPECT_NO_THROW(permuted_set(dir, 3, 1, 8));
  EXPECT_THROW(permuted_set(dir, 5, 1, 9), ArgumentError);
  EXPECT_THROW(permuted_set(dir, 1, 2, 9), ArgumentError);
  EXPECT_EQ(permuted_get(dir, 2), 1);
}

TEST(Swap, DirectoryStoresOnlyOwnedSlice) {
  const WorkerAssignment owners(6, 3);
  PermutedDistributedArray dir(owners, 2);
  EXPECT_EQ(dir.first_index(), 3);
  EXPECT_EQ(dir.end_index(), 5);
  EXPECT_EQ(dir.get(3), 2);
  EXPECT_THROW(dir.get(1), ArgumentError);
}

TEST(Swap, ForcedAcceptanceReproducesIndexProcess) {
  for (int m : {1, 2, 4}) {
    const auto run = run_swaps(4, m, 3, 1.0);
    for (std::size_t s = 0; s < 3; ++s) {
      const std::vector<int> expected(oracle::kDirectoryTrace[s].begin(), oracle::kDirectoryTrace[s].end());
      EXPECT_EQ(invert(run.chains[s]), expected) << "M = " << m << " step " << s + 1;
      if (m == 4) {
        EXPECT_EQ(run.directories[s], expected) << "step " << s + 1;
      }
    }
  }
}

TEST(Swap, DirectoryNamesTheHoldingWorker) {
  for (int m : {1, 2, 3, 5}) {
    const auto run = run_swaps(5, m, 8, 1.0);
    const WorkerAssignment owners(5, m);
    for (std::size_t s = 0; s < run.chains.size(); ++s) {
      const auto holder = invert(run.chains[s]);
      for (int c = 1; c <= 5; ++c)
        EXPECT_EQ(run.directories[s][static_cast<std::size_t>(c - 1)], owners.owner(holder[static_cast<std::size_t>(c - 1)]))
            << "M = " << m << " scan " << s + 1 << " chain " << c;
    }
  }
}

TEST(Swap, ForcedRejectionLeavesChainsUnchanged) {
  const auto run = run_swaps(6, 3, 5, 0.0);
  std::vector<int> identity(6);
  std::iota(identity.begin(), identity.end(), 1);
  for (const auto& c : run.chains) EXPECT_EQ(c, identity);
  for (const auto& d : run.decisions) EXPECT_FALSE(d.accepted);
}

TEST(Swap, TwoChains) {
  const auto run = run_swaps(2, 2, 4, 1.0);
  // Only odd scans propose the single pair.
  EXPECT_EQ(run.chains[0], (std::vector<int>{2, 1}));
  EXPECT_EQ(run.chains[1], (std::vector<int>{2, 1}));
  EXPECT_EQ(run.chains[2], (std::vector<int>{1, 2}));
  EXPECT_EQ(run.decisions.size(), 2U);
}

TEST(Swap, DecisionsIndependentOfWorkerCount) {
  const auto reference = run_swaps(7, 1, 200, std::nullopt, 17);
  int accepted = 0;
  for (const auto& d : reference.decisions) accepted += d.accepted;
  ASSERT_GT(accepted, 0);
  ASSERT_LT(accepted, static_cast<int>(reference.decisions.size()));
  for (int m : {2, 3, 7}) {
    const auto run = run_swaps(7, m, 200, std::nullopt, 17);
    EXPECT_EQ(run.decisions, reference.decisions) << "M = " << m;
    EXPECT_EQ(run.chains, reference.chains) << "M = " << m;
  }
}

TEST(Swap, SoakKeepsPermutationAndDirectoryConsistent) {
  // A thousand scans of real acceptance decisions; partial acceptance makes
  // every scan a different accept/reject pattern.
  const int n = 9;
  for (int m : {2, 4}) {
    const auto run = run_swaps(n, m, 1000, std::nullopt, 99, 0.9);
    const WorkerAssignment owners(n, m);
    int accepted = 0;
    for (const auto& d : run.decisions) accepted += d.accepted;
    EXPECT_GT(accepted, 100);
    EXPECT_LT(accepted, static_cast<int>(run.decisions.size()) - 100);
    for (std::size_t s = 0; s < run.chains.size(); ++s) {
      ASSERT_TRUE(is_permutation_of_1_to_n(run.chains[s])) << "scan " << s + 1;
      const auto holder = invert(run.chains[s]);
      for (int c = 1; c <= n; ++c)
        ASSERT_EQ(run.directories[s][static_cast<std::size_t>(c - 1)], owners.owner(holder[static_cast<std::size_t>(c - 1)]));
    }
  }
}

TEST(Swap, SharedUniformIsKeyedOnScanAndPair) {
  EXPECT_EQ(shared_uniform(1, 3, 2), keyed_rng(1, 3, 2).next_unit_f64());
  EXPECT_NE(shared_uniform(1, 3, 2), shared_uniform(1, 3, 4));
  EXPECT_NE(shared_uniform(1, 3, 2), shared_uniform(1, 5, 2));
}
