#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "roost/bytes.hpp"
#include "roost/errors.hpp"
#include "roost/tag.hpp"
#include "roost/transport.hpp"

namespace roost {

// Reductions whose combine order depends only on the number of leaves.
//
// The tree pairs adjacent nodes bottom-up: level l + 1 node k combines level l
// nodes 2k and 2k + 1; an odd node left over at the end of a level is promoted
// unchanged. Level l node k therefore covers leaves [k * 2^l, (k + 1) * 2^l).
// Which worker computes a node never changes the result.

template <class T, class Combine>
T reduce_tree(std::span<const T> values, Combine combine) {
  if (values.empty()) throw ArgumentError("empty reduction");
  std::vector<T> level(values.begin(), values.end());
  while (level.size() > 1) {
    std::vector<T> next;
    next.reserve((level.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < level.size(); i += 2)
      next.push_back(combine(level[i], level[i + 1]));
    if (level.size() % 2 == 1) next.push_back(std::move(level.back()));
    level = std::move(next);
  }
  return std::move(level.front());
}

/// Strict left-to-right fold, ((v1 + v2) + v3) + ...; the order a serial loop
/// would use. Differs from reduce_tree in rounding for non-associative ops.
template <class T, class Combine>
T left_fold(std::span<const T> values, Combine combine) {
  if (values.empty()) throw ArgumentError("empty reduction");
  T acc = values.front();
  for (std::size_t i = 1; i < values.size(); ++i) acc = combine(acc, values[i]);
  return acc;
}

/// Contiguous block assignment of N leaves to M workers (ranks 1..M).
/// Worker w owns leaves i (1-based) with floor((i - 1) * M / N) = w - 1.
class WorkerAssignment {
 public:
  WorkerAssignment(int n_leaves, int n_workers) : n_leaves_(n_leaves), n_workers_(n_workers) {
    if (n_leaves < 1) throw ArgumentError("WorkerAssignment: need at least one leaf");
    if (n_workers < 1 || n_workers > n_leaves)
      throw ArgumentError("WorkerAssignment: need 1 <= workers <= leaves, got " +
                          std::to_string(n_workers) + " workers for " +
                          std::to_string(n_leaves) + " leaves");
  }

  int n_leaves() const { return n_leaves_; }
  int n_workers() const { return n_workers_; }

  int owner(int leaf) const {
    if (leaf < 1 || leaf > n_leaves_)
      throw ArgumentError("leaf index " + std::to_string(leaf) + " out of range");
    return static_cast<int>((std::int64_t{leaf - 1} * n_workers_) / n_leaves_) + 1;
  }

  /// First leaf owned by `worker` (1-based).
  int first_leaf(int worker) const { return ceil_div(std::int64_t{worker - 1} * n_leaves_) + 1; }
  /// One past the last leaf owned by `worker`.
  int end_leaf(int worker) const { return ceil_div(std::int64_t{worker} * n_leaves_) + 1; }
  int count(int worker) const { return end_leaf(worker) - first_leaf(worker); }

 private:
  int ceil_div(std::int64_t num) const {
    return static_cast<int>((num + n_workers_ - 1) / n_workers_);
  }

  int n_leaves_;
  int n_workers_;
};

/// Wire encoding for reduction payloads. Specialize for custom types.
template <class T>
struct WireCodec;

template <>
struct WireCodec<double> {
  static Bytes encode(double v) {
    ByteWriter w;
    w.put(v);
    return w.take();
  }
  static double decode(std::span<const std::byte> b) {
    ByteReader r(b);
    return r.get<double>();
  }
};

template <>
struct WireCodec<std::int64_t> {
  static Bytes encode(std::int64_t v) {
    ByteWriter w;
    w.put(v);
    return w.take();
  }
  static std::int64_t decode(std::span<const std::byte> b) {
    ByteReader r(b);
    return r.get<std::int64_t>();
  }
};

/// Collective tree reduction. Every worker calls it once per epoch with the
/// leaves it owns under `assignment`, in leaf order. Returns the result on the
/// root (the owner of leaf 1) and nullopt elsewhere. The result is bit-equal to
/// reduce_tree over all leaves for every worker count.
///
/// Uses protocol steps [base_step, base_step + depth).
template <class T, class Combine, class Codec = WireCodec<T>>
std::optional<T> distributed_reduce(Transport& transport, const WorkerAssignment& assignment,
                                    std::span<const T> local_leaves, Combine combine,
                                    std::uint64_t base_step) {
  const int me = transport.rank();
  if (assignment.n_workers() != transport.size())
    throw ProtocolError("distributed_reduce: assignment is for " +
                        std::to_string(assignment.n_workers()) + " workers, transport has " +
                        std::to_string(transport.size()));
  if (static_cast<int>(local_leaves.size()) != assignment.count(me))
    throw ProtocolError("distributed_reduce: rank " + std::to_string(me) + " holds " +
                        std::to_string(local_leaves.size()) + " leaves, expected " +
                        std::to_string(assignment.count(me)));

  const int n = assignment.n_leaves();
  auto node_owner = [&](int level, int k) { return assignment.owner((k << level) + 1); };

  // Nodes this worker owns at the current level, by node index.
  std::vector<std::pair<int, T>> mine;
  const int first = assignment.first_leaf(me) - 1;
  for (std::size_t i = 0; i < local_leaves.size(); ++i)
    mine.emplace_back(first + static_cast<int>(i), local_leaves[i]);

  int level = 0;
  int width = n;
  std::vector<RequestHandle> pending;
  while (width > 1) {
    const std::uint64_t step = base_step + static_cast<std::uint64_t>(level);
    // Right children whose parent lives elsewhere go out first.
    for (auto& [k, value] : mine) {
      if (k % 2 == 1) {
        const int parent_owner = node_owner(level + 1, k / 2);
        if (parent_owner != me)
          pending.push_back(transport.send(
              parent_owner, tag(step, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(me)),
              Codec::encode(value)));
      }
    }
    std::vector<std::pair<int, T>> next;
    for (std::size_t i = 0; i < mine.size(); ++i) {
      const int k = mine[i].first;
      if (k % 2 == 1) continue;  // consumed below or sent above
      const int parent = k / 2;
      const int right = k + 1;
      if (right >= width) {
        next.emplace_back(parent, std::move(mine[i].second));
        continue;
      }
      const int right_owner = node_owner(level, right);
      if (right_owner == me) {
        next.emplace_back(parent, combine(mine[i].second, mine[i + 1].second));
      } else {
        const Bytes b = transport.receive(
            right_owner,
            tag(step, static_cast<std::uint32_t>(right), static_cast<std::uint32_t>(right_owner)));
        next.emplace_back(parent, combine(mine[i].second, Codec::decode(b)));
      }
    }
    mine = std::move(next);
    width = (width + 1) / 2;
    ++level;
  }
  transport.waitall(pending);
  if (me == assignment.owner(1)) return std::move(mine.front().second);
  return std::nullopt;
}

}  // namespace roost
