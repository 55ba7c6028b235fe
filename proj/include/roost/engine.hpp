#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roost/explore.hpp"
#include "roost/model.hpp"
#include "roost/recorders.hpp"
#include "roost/rng.hpp"
#include "roost/swap.hpp"
#include "roost/transport.hpp"

namespace roost {

struct RecordSet {
  bool traces = false;
  bool online = true;
  bool round_trip = true;
  bool disk = false;

  /// Comma-separated subset of traces, online, round_trip, disk; "" or "none"
  /// selects nothing.
  static RecordSet parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const RecordSet&, const RecordSet&) = default;
};

struct RunConfig {
  int n_chains = 10;
  int n_rounds = 10;
  std::uint64_t seed = 1;
  RecordSet record;
  bool checkpoint = false;
  ExplorerConfig explorer;
  std::filesystem::path output_dir;  // empty: nothing is written
  int n_threads = 1;                 // exploration threads per worker
  /// Opaque description of the path, stored in checkpoints so a resumed run
  /// can rebuild it.
  std::string target_descriptor;
  /// Stop (as if killed) once this round is complete; 0 runs to the end.
  int stop_after_round = 0;
  /// Test hook: every swap uses this acceptance probability.
  std::optional<double> forced_alpha;

  void validate() const;
};

struct RoundReport {
  int round = 0;
  std::uint64_t scans = 0;
  std::uint64_t restarts = 0;  // cumulative
  std::uint64_t round_trips = 0;
  double lambda = 0.0;
  double time_s = 0.0;
  double log_z_ratio = 0.0;
  double min_alpha = 0.0;
  double mean_alpha = 0.0;

  friend bool operator==(const RoundReport&, const RoundReport&) = default;
};

struct ReplicaSnapshot {
  int index = 0;
  int chain = 0;
  std::vector<double> state;
  SplittableRng rng{0};
  RoundTripState round_trip;

  friend bool operator==(const ReplicaSnapshot&, const ReplicaSnapshot&) = default;
};

/// Everything needed to continue a run at a round boundary.
struct EngineState {
  int completed_rounds = 0;
  std::uint64_t scan_counter = 0;  // global index of the last scan performed
  Schedule schedule;               // schedule for the next round
  std::vector<Schedule> schedule_history;  // schedule used by each completed round
  std::vector<RoundReport> reports;
  std::vector<ReplicaSnapshot> replicas;  // by replica index
  std::vector<int> directory;             // chain -> holding worker
  SplittableRng adaptation_rng{0};
  std::string run_id;

  friend bool operator==(const EngineState&, const EngineState&) = default;
};

/// Outputs of a run. Complete on rank 1; other ranks only see `finished`.
struct RunResult {
  std::vector<RoundReport> reports;
  std::vector<Schedule> schedules;
  std::vector<TraceRow> trace;  // final round, target chain only
  std::vector<SwapDecision> swaps;
  OnlineStats online;
  EngineState state;
  std::optional<std::filesystem::path> last_checkpoint;
  bool finished = false;
};

struct RunHooks {
  /// Called on rank 1 after each round's report is complete.
  std::function<void(const RoundReport&)> on_round;
};

/// Lambda = sum of the per-pair rejection rates.
double global_barrier(std::span<const double> rejection_rates);

/// Equi-partitions the piecewise-linear cumulative rejection curve through
/// (beta_i, sum_{k<i} r_k). Returns `old` when the curve is flat or the
/// result would not increase strictly.
Schedule adapt_schedule(std::span<const double> rejection_rates, const Schedule& old);

/// log(Z_1 / Z_0) = sum_k log mean exp(ell_{k+1}(x) - ell_k(x)), x at chain k.
double stepping_stone(std::span<const LogSumExp> per_pair);

/// Fixed-width report table in the column order
/// #scans restarts Lambda time(s) allc(B) log(Z1/Z0) min(alpha) mean(alpha).
std::string report_header();
std::string report_row(const RoundReport& report);
std::string report_rule();

/// Fresh state: replica i at chain i, streams split from new_rng(seed) in
/// replica order, then the adaptation stream.
EngineState initial_state(const RunConfig& config, const Path& path);

/// Collective: every worker calls it with the same config and path.
RunResult run(const RunConfig& config, const Path& path, Transport& transport,
              const RunHooks& hooks = {});

/// Continues `state` (as stored by a checkpoint) to config.n_rounds.
RunResult resume(const RunConfig& config, EngineState state, const Path& path,
                 Transport& transport, const RunHooks& hooks = {});

/// CSV with header scan,x1..xd; floats in shortest round-trip form.
std::string format_trace_csv(std::span<const TraceRow> rows, std::size_t dimension);
/// Formats a double in its shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace roost
