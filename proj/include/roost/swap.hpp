#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "roost/errors.hpp"
#include "roost/model.hpp"
#include "roost/recorders.hpp"
#include "roost/reduce.hpp"
#include "roost/rng.hpp"
#include "roost/tag.hpp"
#include "roost/transport.hpp"

namespace roost {

struct SwapDecision {
  std::uint64_t t = 0;
  int lower_chain = 0;  // the pair is (lower_chain, lower_chain + 1)
  bool accepted = false;
  double alpha = 0.0;

  friend bool operator==(const SwapDecision&, const SwapDecision&) = default;
};

struct TraceRow {
  std::uint64_t scan = 0;  // 1-based within the round
  int replica = 0;
  std::vector<double> state;
};

/// Everything a replica accumulates between two round boundaries, plus the
/// round trip state that persists across rounds.
struct ReplicaRecorders {
  std::vector<PairStats> pairs;        // indexed by lower chain - 1
  std::vector<LogSumExp> log_ratios;   // stepping stone, indexed by lower chain - 1
  OnlineStats online;
  RoundTripState round_trip;
  std::vector<TraceRow> trace;
  std::vector<SwapDecision> swaps;

  void reset_round(int n_chains) {
    pairs.assign(static_cast<std::size_t>(n_chains - 1), PairStats{});
    log_ratios.assign(static_cast<std::size_t>(n_chains - 1), LogSumExp{});
    online = OnlineStats{};
    trace.clear();
    swaps.clear();
  }
};

/// The mobile sampler unit. Replicas keep their state and exchange chains.
struct Replica {
  std::vector<double> state;
  int chain = 0;          // 1..N, changes only through accepted swaps
  int replica_index = 0;  // 1..N, immutable identity
  SplittableRng rng{0};
  ReplicaRecorders recorders;
};

/// Pair leaders proposed at scan t: odd lower chains on odd t, even on even t.
inline std::vector<int> swap_set(std::uint64_t t, int n_chains) {
  if (t < 1) throw ArgumentError("swap_set: scans are numbered from 1");
  std::vector<int> leaders;
  for (int i = (t % 2 == 1) ? 1 : 2; i < n_chains; i += 2) leaders.push_back(i);
  return leaders;
}

/// The chain `chain` is paired with at scan t, if any.
inline std::optional<int> swap_partner(int chain, std::uint64_t t, int n_chains) {
  const bool odd_scan = t % 2 == 1;
  auto leads = [&](int c) { return c >= 1 && c < n_chains && (c % 2 == 1) == odd_scan; };
  if (leads(chain)) return chain + 1;
  if (leads(chain - 1)) return chain - 1;
  return std::nullopt;
}

/// One side's contribution ell_partner(x) - ell_own(x) to the swap log ratio.
inline double swap_log_ratio_contribution(double partner_logp_at_own, double own_logp_at_own) {
  if (partner_logp_at_own == kNegInf) return kNegInf;
  const double d = partner_logp_at_own - own_logp_at_own;
  if (std::isnan(d)) throw KernelError("swap: NaN in log ratio contribution");
  return d;
}

/// Acceptance probability from the two contributions. The lower chain's term
/// is always added first so both partners compute the same bits.
inline double swap_alpha_from_contributions(double lower_term, double upper_term) {
  const double log_ratio = lower_term + upper_term;
  if (std::isnan(log_ratio)) throw KernelError("swap: NaN log acceptance ratio");
  if (log_ratio >= 0.0) return 1.0;
  return std::exp(log_ratio);
}

/// alpha = min(1, exp(ell_i(x_j) + ell_j(x_i) - ell_i(x_i) - ell_j(x_j))).
template <class DensityI, class DensityJ>
double swap_alpha(const DensityI& logp_i, const DensityJ& logp_j, std::span<const double> x_i,
                  std::span<const double> x_j) {
  const double ii = logp_i(x_i);
  const double ji = logp_j(x_i);
  const double ij = logp_i(x_j);
  const double jj = logp_j(x_j);
  if (std::isnan(ii) || std::isnan(ji) || std::isnan(ij) || std::isnan(jj))
    throw KernelError("swap: log density returned NaN");
  if (ji == kNegInf || ij == kNegInf) return 0.0;
  return swap_alpha_from_contributions(swap_log_ratio_contribution(ji, ii),
                                       swap_log_ratio_contribution(ij, jj));
}

/// Uniform both swap partners derive without exchanging it.
inline double shared_uniform(std::uint64_t seed, std::uint64_t t, std::uint64_t i) {
  return keyed_rng(seed, t, i).next_unit_f64();
}

/// Distributed directory: entry j names the worker currently holding chain j.
/// Each worker stores the slice of indices it owns under the block assignment;
/// an index is written by exactly one worker per step.
class PermutedDistributedArray {
 public:
  PermutedDistributedArray(const WorkerAssignment& owners, int self_rank)
      : owners_(owners), self_(self_rank) {
    first_ = owners.first_leaf(self_rank);
    const int count = owners.count(self_rank);
    holders_.resize(static_cast<std::size_t>(count));
    last_write_.assign(static_cast<std::size_t>(count), 0);
    // Replica j starts at chain j on the worker owning leaf j.
    for (int k = 0; k < count; ++k) holders_[static_cast<std::size_t>(k)] = owners.owner(first_ + k);
  }

  int size() const { return owners_.n_leaves(); }
  int self_rank() const { return self_; }
  const WorkerAssignment& owners() const { return owners_; }

  int owner_of(int index) const {
    check_range(index);
    return owners_.owner(index);
  }
  bool owns(int index) const { return owner_of(index) == self_; }

  int first_index() const { return first_; }
  int end_index() const { return first_ + static_cast<int>(holders_.size()); }

  /// Reads a locally stored entry.
  int get(int index) const {
    check_local(index);
    return holders_[static_cast<std::size_t>(index - first_)];
  }

  /// Writes a locally stored entry; a second write at the same step is a
  /// protocol violation.
  void set(int index, int holder, std::uint64_t step) {
    check_local(index);
    if (holder < 1 || holder > owners_.n_workers())
      throw ArgumentError("permuted_set: holder rank " + std::to_string(holder) + " out of range");
    auto& last = last_write_[static_cast<std::size_t>(index - first_)];
    if (step != 0 && last == step)
      throw ProtocolError("permuted_set: index " + std::to_string(index) +
                          " written twice at step " + std::to_string(step));
    last = step;
    holders_[static_cast<std::size_t>(index - first_)] = holder;
  }

  std::span<const int> local_slice() const { return holders_; }

  /// Restores a full directory (e.g. from a checkpoint), keeping this slice.
  void assign(std::span<const int> full) {
    if (static_cast<int>(full.size()) != size())
      throw ArgumentError("PermutedDistributedArray: wrong directory length");
    for (std::size_t k = 0; k < holders_.size(); ++k) {
      holders_[k] = full[static_cast<std::size_t>(first_ - 1) + k];
      last_write_[k] = 0;
    }
  }

 private:
  void check_range(int index) const {
    if (index < 1 || index > owners_.n_leaves())
      throw ArgumentError("PermutedDistributedArray: index " + std::to_string(index) +
                          " out of range 1.." + std::to_string(owners_.n_leaves()));
  }
  void check_local(int index) const {
    check_range(index);
    if (index < first_ || index >= end_index())
      throw ArgumentError("PermutedDistributedArray: index " + std::to_string(index) +
                          " is not stored on rank " + std::to_string(self_));
  }

  WorkerAssignment owners_;
  int self_;
  int first_ = 1;
  std::vector<int> holders_;
  std::vector<std::uint64_t> last_write_;
};

inline int permuted_get(const PermutedDistributedArray& a, int chain) { return a.get(chain); }
inline void permuted_set(PermutedDistributedArray& a, int chain, int holder, std::uint64_t step) {
  a.set(chain, holder, step);
}

struct SwapContext {
  Transport& transport;
  PermutedDistributedArray& directory;
  const Path& path;
  const Schedule& schedule;
  std::uint64_t seed = 0;
  /// Test hook: replaces every computed alpha.
  std::optional<double> forced_alpha;
};

/// Communication phase of scan t for the replicas held by this worker
/// (ordered by replica index). Collective: every worker calls it once per scan.
///
/// Per pair (i, i + 1) the protocol is:
///   1. owners of directory entries i and i + 1 exchange them;
///   2. each owner tells the holder of its chain where the partner chain lives;
///   3. the two holders exchange one float, ell_partner(x) - ell_own(x);
///   4. both compute the same alpha and shared uniform; on accept they
///      exchange chain indices;
///   5. each former holder reports the new holder of its chain to that chain's
///      directory owner, which performs the single write of the step.
/// Returns the decisions of pairs whose lower chain is held here.
std::vector<SwapDecision> communicate(std::span<Replica> local, std::uint64_t t, SwapContext& ctx);

/// Assembles the full directory on rank 1 (collective). Other ranks get {}.
std::vector<int> gather_directory(Transport& transport, const PermutedDistributedArray& directory,
                                  std::uint64_t step);

}  // namespace roost
