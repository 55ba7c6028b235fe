#include "roost/engine.hpp"

#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <json.hpp>
#include <sstream>

#include "roost/checkpoint.hpp"
#include "roost/reduce.hpp"
#include "roost/thread_pool.hpp"

namespace roost {

namespace fs = std::filesystem;

// ---- configuration ----------------------------------------------------------

RecordSet RecordSet::parse(std::string_view text) {
  RecordSet r{false, false, false, false};
  if (text.empty() || text == "none") return r;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string_view item = text.substr(pos, comma - pos);
    if (item == "traces")
      r.traces = true;
    else if (item == "online")
      r.online = true;
    else if (item == "round_trip")
      r.round_trip = true;
    else if (item == "disk")
      r.disk = true;
    else
      throw ArgumentError("unknown recorder '" + std::string(item) +
                          "' (expected traces, online, round_trip, disk)");
    pos = comma + 1;
  }
  return r;
}

std::string RecordSet::to_string() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(traces, "traces");
  add(online, "online");
  add(round_trip, "round_trip");
  add(disk, "disk");
  return out.empty() ? "none" : out;
}

void RunConfig::validate() const {
  if (n_chains < 2) throw ArgumentError("need at least 2 chains");
  if (n_chains >= static_cast<int>(kTagFieldLimit))
    throw ArgumentError("at most " + std::to_string(kTagFieldLimit - 1) + " chains are supported");
  if (n_rounds < 1) throw ArgumentError("need at least 1 round");
  if (n_rounds > 40) throw ArgumentError("at most 40 rounds are supported");
  if (n_threads < 1) throw ArgumentError("need at least 1 thread");
  if (checkpoint && output_dir.empty()) throw ArgumentError("checkpointing needs an output directory");
  if (stop_after_round < 0) throw ArgumentError("stop-after round must be >= 0");
  if (forced_alpha && !(*forced_alpha >= 0.0 && *forced_alpha <= 1.0))
    throw ArgumentError("forced alpha must lie in [0, 1]");
  explorer.validate();
}

// ---- diagnostics ------------------------------------------------------------

double global_barrier(std::span<const double> rejection_rates) {
  double lambda = 0.0;
  for (double r : rejection_rates) lambda += r;
  return lambda;
}

Schedule adapt_schedule(std::span<const double> rejection_rates, const Schedule& old) {
  const int n = old.n_chains();
  if (static_cast<int>(rejection_rates.size()) != n - 1)
    throw ArgumentError("adapt_schedule: need one rejection rate per adjacent pair");
  for (double r : rejection_rates)
    if (!(r >= 0.0)) throw ArgumentError("adapt_schedule: rejection rates must be >= 0");
  if (n == 2) return old;

  const auto& beta = old.betas();
  std::vector<double> cumulative(static_cast<std::size_t>(n), 0.0);
  for (int i = 1; i < n; ++i)
    cumulative[static_cast<std::size_t>(i)] =
        cumulative[static_cast<std::size_t>(i - 1)] + rejection_rates[static_cast<std::size_t>(i - 1)];
  const double total = cumulative.back();
  if (total == 0.0) return old;

  std::vector<double> next(static_cast<std::size_t>(n));
  next.front() = 0.0;
  next.back() = 1.0;
  std::size_t seg = 0;
  for (int m = 1; m < n - 1; ++m) {
    const double level = total * m / (n - 1);
    while (seg + 1 < cumulative.size() - 1 && cumulative[seg + 1] < level) ++seg;
    const double lo = cumulative[seg];
    const double hi = cumulative[seg + 1];
    const double frac = hi > lo ? (level - lo) / (hi - lo) : 0.0;
    next[static_cast<std::size_t>(m)] = beta[seg] + frac * (beta[seg + 1] - beta[seg]);
  }
  for (std::size_t i = 1; i < next.size(); ++i)
    if (!(next[i] > next[i - 1])) return old;
  return Schedule(std::move(next));
}

double stepping_stone(std::span<const LogSumExp> per_pair) {
  double total = 0.0;
  for (const auto& acc : per_pair) total += acc.log_mean();
  return total;
}

namespace {

std::string cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string row(const std::vector<std::string>& cells) {
  std::string out;
  char buf[64];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, " %10s", c.c_str());
    out += buf;
  }
  return out;
}

}  // namespace

std::string report_header() {
  return row({"#scans", "restarts", "Λ  ", "time(s)", "allc(B)", "log(Z₁/Z₀)", "min(α) ",
              "mean(α) "});
}

std::string report_rule() { return std::string(88, '-'); }

std::string report_row(const RoundReport& r) {
  return row({cell(static_cast<double>(r.scans)), std::to_string(r.restarts), cell(r.lambda),
              cell(r.time_s), "", cell(r.log_z_ratio), cell(r.min_alpha), cell(r.mean_alpha)});
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string format_trace_csv(std::span<const TraceRow> rows, std::size_t dimension) {
  std::string out = "scan";
  for (std::size_t i = 1; i <= dimension; ++i) out += ",x" + std::to_string(i);
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.scan);
    for (double v : r.state) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

// ---- state ------------------------------------------------------------------

EngineState initial_state(const RunConfig& config, const Path& path) {
  config.validate();
  const int n = config.n_chains;
  EngineState s;
  s.schedule = Schedule::equally_spaced(n);
  SplittableRng master = new_rng(config.seed);
  for (int i = 1; i <= n; ++i) {
    ReplicaSnapshot r;
    r.index = i;
    r.chain = i;
    r.state = path.initial_state();
    r.rng = master.split();
    if (config.record.round_trip) r.round_trip.observe(r.chain, n);
    s.replicas.push_back(std::move(r));
  }
  s.adaptation_rng = master.split();
  return s;
}

namespace {

/// Per-replica round statistics; the leaves of the end-of-round reduction.
struct RoundStats {
  std::vector<PairStats> pairs;
  std::vector<LogSumExp> log_ratios;
  OnlineStats online;
  std::uint64_t restarts = 0;
  std::uint64_t round_trips = 0;

  static RoundStats merge(const RoundStats& a, const RoundStats& b) {
    RoundStats out;
    out.pairs.resize(a.pairs.size());
    out.log_ratios.resize(a.log_ratios.size());
    for (std::size_t k = 0; k < a.pairs.size(); ++k) {
      out.pairs[k] = PairStats::merge(a.pairs[k], b.pairs[k]);
      out.log_ratios[k] = LogSumExp::merge(a.log_ratios[k], b.log_ratios[k]);
    }
    out.online = OnlineStats::merge(a.online, b.online);
    out.restarts = a.restarts + b.restarts;
    out.round_trips = a.round_trips + b.round_trips;
    return out;
  }
};

struct RoundStatsCodec {
  static Bytes encode(const RoundStats& s) {
    ByteWriter w;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.pairs.size()));
    for (std::size_t k = 0; k < s.pairs.size(); ++k) {
      w.put(s.pairs[k].alpha_sum).put(s.pairs[k].rejection_sum).put(s.pairs[k].attempts);
      w.put(s.log_ratios[k].max).put(s.log_ratios[k].scaled).put(s.log_ratios[k].count);
    }
    s.online.write(w);
    w.put(s.restarts).put(s.round_trips);
    return w.take();
  }
  static RoundStats decode(std::span<const std::byte> b) {
    ByteReader r(b);
    RoundStats s;
    const auto n = r.get<std::uint32_t>();
    s.pairs.resize(n);
    s.log_ratios.resize(n);
    for (std::uint32_t k = 0; k < n; ++k) {
      s.pairs[k].alpha_sum = r.get<double>();
      s.pairs[k].rejection_sum = r.get<double>();
      s.pairs[k].attempts = r.get<std::uint64_t>();
      s.log_ratios[k].max = r.get<double>();
      s.log_ratios[k].scaled = r.get<double>();
      s.log_ratios[k].count = r.get<std::uint64_t>();
    }
    s.online = OnlineStats::read(r);
    s.restarts = r.get<std::uint64_t>();
    s.round_trips = r.get<std::uint64_t>();
    if (!r.done()) throw ProtocolError("round statistics: trailing bytes");
    return s;
  }
};

void write_rows(ByteWriter& w, std::span<const TraceRow> rows) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(rows.size()));
  for (const auto& row : rows) w.put(row.scan).put<std::int32_t>(row.replica).put_doubles(row.state);
}

void read_rows(ByteReader& r, std::vector<TraceRow>& out) {
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    TraceRow row;
    row.scan = r.get<std::uint64_t>();
    row.replica = r.get<std::int32_t>();
    row.state = r.get_doubles();
    out.push_back(std::move(row));
  }
}

void write_swaps(ByteWriter& w, std::span<const SwapDecision> swaps) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(swaps.size()));
  for (const auto& d : swaps)
    w.put(d.t).put<std::int32_t>(d.lower_chain).put<std::uint8_t>(d.accepted ? 1 : 0).put(d.alpha);
}

void read_swaps(ByteReader& r, std::vector<SwapDecision>& out) {
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    SwapDecision d;
    d.t = r.get<std::uint64_t>();
    d.lower_chain = r.get<std::int32_t>();
    d.accepted = r.get<std::uint8_t>() != 0;
    d.alpha = r.get<double>();
    out.push_back(d);
  }
}

std::string make_run_id(std::uint64_t seed) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  ::localtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%d-%H-%M-%S", &tm);
  return std::string(stamp) + "-seed" + std::to_string(seed) + "-" + std::to_string(::getpid());
}

nlohmann::json report_json(std::span<const RoundReport> reports) {
  auto arr = nlohmann::json::array();
  for (const auto& r : reports)
    arr.push_back({{"round", r.round},
                   {"scans", r.scans},
                   {"restarts", r.restarts},
                   {"round_trips", r.round_trips},
                   {"lambda", r.lambda},
                   {"time_s", r.time_s},
                   {"log_z_ratio", r.log_z_ratio},
                   {"min_alpha", r.min_alpha},
                   {"mean_alpha", r.mean_alpha}});
  return arr;
}

std::string schedules_csv(std::span<const Schedule> history) {
  std::string out = "round";
  if (!history.empty())
    for (int i = 1; i <= history.front().n_chains(); ++i) out += ",beta" + std::to_string(i);
  out += '\n';
  int round = 1;
  for (const auto& s : history) {
    out += std::to_string(round++);
    for (double b : s.betas()) out += ',' + format_double(b);
    out += '\n';
  }
  return out;
}

std::string swaps_csv(std::span<const SwapDecision> swaps) {
  std::string out = "t,lower_chain,accepted,alpha\n";
  for (const auto& d : swaps)
    out += std::to_string(d.t) + ',' + std::to_string(d.lower_chain) + ',' +
           (d.accepted ? "1" : "0") + ',' + format_double(d.alpha) + '\n';
  return out;
}

nlohmann::json online_json(const OnlineStats& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"variance", s.variance()},
          {"min", s.min},     {"max", s.max}};
}

class Engine {
 public:
  Engine(const RunConfig& config, EngineState state, const Path& path, Transport& transport,
         const RunHooks& hooks)
      : config_(config),
        state_(std::move(state)),
        path_(path),
        net_(transport),
        hooks_(hooks),
        n_(config.n_chains),
        owners_(n_, transport.size()),
        directory_(owners_, transport.rank()),
        pool_(config.n_threads) {
    config_.validate();
    if (path_.dimension() < 1) throw ArgumentError("path has no dimension");
    if (static_cast<int>(state_.replicas.size()) != n_ || state_.schedule.n_chains() != n_)
      throw ArgumentError("engine state does not match the configured number of chains");
    const int me = net_.rank();
    for (int i = owners_.first_leaf(me); i < owners_.end_leaf(me); ++i) {
      const auto& snap = state_.replicas[static_cast<std::size_t>(i - 1)];
      Replica r;
      r.state = snap.state;
      r.chain = snap.chain;
      r.replica_index = snap.index;
      r.rng = snap.rng;
      r.recorders.round_trip = snap.round_trip;
      local_.push_back(std::move(r));
    }
    // Replicas live on the owner of their index, so the directory follows
    // from the chain permutation under the current worker count.
    state_.directory.assign(static_cast<std::size_t>(n_), 0);
    for (const auto& snap : state_.replicas) {
      if (snap.chain < 1 || snap.chain > n_ || state_.directory[static_cast<std::size_t>(snap.chain - 1)] != 0)
        throw ArgumentError("engine state: replica chains are not a permutation of 1..N");
      state_.directory[static_cast<std::size_t>(snap.chain - 1)] = owners_.owner(snap.index);
    }
    directory_.assign(state_.directory);
  }

  RunResult run() {
    RunResult result;
    for (int round = state_.completed_rounds + 1; round <= config_.n_rounds; ++round) {
      run_round(round, result);
      if (config_.stop_after_round == round && round < config_.n_rounds) {
        fill(result);
        return result;
      }
    }
    result.finished = true;
    fill(result);
    return result;
  }

 private:
  bool root() const { return net_.rank() == 1; }

  void fill(RunResult& result) {
    result.reports = state_.reports;
    result.schedules = state_.schedule_history;
    result.state = state_;
  }

  void explore_and_accumulate(Replica& r) {
    const double beta = state_.schedule.beta(r.chain);
    auto logp = [this, beta](std::span<const double> x) { return path_.log_density(beta, x); };
    const double own = explore_in_place(r.state, logp, r.rng, config_.explorer);
    if (r.chain < n_) {
      const double next = path_.log_density(state_.schedule.beta(r.chain + 1), r.state);
      const double inc = next == kNegInf ? kNegInf : next - own;
      r.recorders.log_ratios[static_cast<std::size_t>(r.chain - 1)].add(inc);
    }
  }

  void run_round(int round, RunResult& result) {
    const auto started = std::chrono::steady_clock::now();
    const std::uint64_t scans = std::uint64_t{1} << round;
    const bool final_round = round == config_.n_rounds;
    const bool keep_trace = (final_round && config_.record.traces) || config_.record.disk;
    const bool keep_online = final_round && config_.record.online;
    const bool keep_swaps = final_round && config_.record.traces;

    for (auto& r : local_) r.recorders.reset_round(n_);
    std::vector<SwapDecision> swaps;

    SwapContext ctx{net_, directory_, path_, state_.schedule, config_.seed, config_.forced_alpha};
    for (std::uint64_t s = 1; s <= scans; ++s) {
      const std::uint64_t t = ++state_.scan_counter;
      pool_.parallel_for(local_.size(), [&](std::size_t i) { explore_and_accumulate(local_[i]); });
      auto decisions = communicate(local_, t, ctx);
      if (keep_swaps) swaps.insert(swaps.end(), decisions.begin(), decisions.end());
      for (auto& r : local_) {
        if (config_.record.round_trip) r.recorders.round_trip.observe(r.chain, n_);
        if (r.chain != n_) continue;
        if (keep_trace) r.recorders.trace.push_back({s, r.replica_index, r.state});
        if (keep_online) r.recorders.online.add(r.state);
      }
    }

    const std::uint64_t t_end = state_.scan_counter;
    std::vector<RoundStats> leaves;
    for (const auto& r : local_)
      leaves.push_back({r.recorders.pairs, r.recorders.log_ratios, r.recorders.online,
                        r.recorders.round_trip.restarts, r.recorders.round_trip.round_trips});
    auto total = distributed_reduce<RoundStats, decltype(&RoundStats::merge), RoundStatsCodec>(
        net_, owners_, std::span<const RoundStats>(leaves), &RoundStats::merge,
        protocol_step(t_end, phase::kReduceBase));

    std::vector<double> next_betas;
    if (root()) {
      std::vector<double> rates;
      double alpha_sum = 0.0;
      double alpha_min = 1.0;
      for (const auto& p : total->pairs) {
        rates.push_back(p.rejection_rate());
        alpha_sum += p.mean_alpha();
        alpha_min = std::min(alpha_min, p.mean_alpha());
      }
      RoundReport rep;
      rep.round = round;
      rep.scans = scans;
      rep.restarts = total->restarts;
      rep.round_trips = total->round_trips;
      rep.lambda = global_barrier(rates);
      rep.log_z_ratio = stepping_stone(total->log_ratios);
      rep.min_alpha = alpha_min;
      rep.mean_alpha = alpha_sum / static_cast<double>(n_ - 1);
      rep.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      state_.reports.push_back(rep);
      state_.schedule_history.push_back(state_.schedule);
      next_betas = adapt_schedule(rates, state_.schedule).betas();
      if (keep_online) result.online = total->online;
      if (hooks_.on_round) hooks_.on_round(rep);
    } else {
      state_.schedule_history.push_back(state_.schedule);
    }
    state_.schedule = Schedule(broadcast_betas(next_betas, t_end));
    state_.completed_rounds = round;

    if (keep_trace || keep_swaps) {
      auto [rows, all_swaps] = gather_samples(swaps, t_end);
      if (root()) {
        std::sort(rows.begin(), rows.end(), [](const TraceRow& a, const TraceRow& b) { return a.scan < b.scan; });
        std::sort(all_swaps.begin(), all_swaps.end(), [](const SwapDecision& a, const SwapDecision& b) {
          return a.t != b.t ? a.t < b.t : a.lower_chain < b.lower_chain;
        });
        if (!config_.output_dir.empty() && config_.record.disk)
          write_text_file(config_.output_dir / "samples" / ("round_" + std::to_string(round) + ".csv"),
                          format_trace_csv(rows, path_.dimension()));
        if (final_round && config_.record.traces) {
          result.trace = std::move(rows);
          result.swaps = std::move(all_swaps);
        }
      }
    }

    if (config_.checkpoint) {
      gather_state(t_end);
      if (root()) {
        if (state_.run_id.empty()) state_.run_id = make_run_id(config_.seed);
        result.last_checkpoint = write_checkpoint(config_.output_dir, config_, net_.size(), state_);
      }
    }

    if (root() && !config_.output_dir.empty()) write_outputs(final_round, result);
  }

  std::vector<double> broadcast_betas(const std::vector<double>& betas, std::uint64_t t_end) {
    const auto step = protocol_step(t_end, phase::kBroadcast);
    if (root()) {
      std::vector<RequestHandle> sends;
      for (int r = 2; r <= net_.size(); ++r) {
        ByteWriter w;
        w.put_doubles(betas);
        sends.push_back(net_.send(r, tag(step, 0, 1), w.take()));
      }
      net_.waitall(sends);
      return betas;
    }
    const Bytes b = net_.receive(1, tag(step, 0, 1));
    ByteReader r(b);
    return r.get_doubles();
  }

  std::pair<std::vector<TraceRow>, std::vector<SwapDecision>> gather_samples(
      const std::vector<SwapDecision>& swaps, std::uint64_t t_end) {
    const auto step = protocol_step(t_end, phase::kGatherTrace);
    std::vector<TraceRow> rows;
    for (const auto& r : local_) rows.insert(rows.end(), r.recorders.trace.begin(), r.recorders.trace.end());
    if (!root()) {
      ByteWriter w;
      write_rows(w, rows);
      write_swaps(w, swaps);
      net_.send(1, tag(step, 0, static_cast<std::uint32_t>(net_.rank())), w.take()).wait();
      return {};
    }
    std::vector<SwapDecision> all_swaps = swaps;
    for (int src = 2; src <= net_.size(); ++src) {
      const Bytes b = net_.receive(src, tag(step, 0, static_cast<std::uint32_t>(src)));
      ByteReader r(b);
      read_rows(r, rows);
      read_swaps(r, all_swaps);
    }
    return {std::move(rows), std::move(all_swaps)};
  }

  /// Brings replica snapshots and the directory to rank 1.
  void gather_state(std::uint64_t t_end) {
    const auto step = protocol_step(t_end, phase::kGatherReplicas);
    for (const auto& r : local_) {
      auto& snap = state_.replicas[static_cast<std::size_t>(r.replica_index - 1)];
      snap.chain = r.chain;
      snap.state = r.state;
      snap.rng = r.rng;
      snap.round_trip = r.recorders.round_trip;
    }
    if (!root()) {
      ByteWriter w;
      w.put<std::uint32_t>(static_cast<std::uint32_t>(local_.size()));
      for (const auto& r : local_) write_snapshot(w, state_.replicas[static_cast<std::size_t>(r.replica_index - 1)]);
      net_.send(1, tag(step, 0, static_cast<std::uint32_t>(net_.rank())), w.take()).wait();
    } else {
      for (int src = 2; src <= net_.size(); ++src) {
        const Bytes b = net_.receive(src, tag(step, 0, static_cast<std::uint32_t>(src)));
        ByteReader rd(b);
        const auto count = rd.get<std::uint32_t>();
        for (std::uint32_t k = 0; k < count; ++k) {
          ReplicaSnapshot snap = read_snapshot(rd);
          if (snap.index < 1 || snap.index > n_) throw ProtocolError("gathered replica index out of range");
          state_.replicas[static_cast<std::size_t>(snap.index - 1)] = std::move(snap);
        }
      }
    }
    auto full = gather_directory(net_, directory_, protocol_step(t_end, phase::kGatherDirectory));
    if (root()) state_.directory = std::move(full);
  }

  void write_outputs(bool final_round, const RunResult& result) {
    const fs::path& out = config_.output_dir;
    write_text_file(out / "report.json", report_json(state_.reports).dump(2) + "\n");
    write_text_file(out / "schedules.csv", schedules_csv(state_.schedule_history));
    if (!final_round) return;
    if (config_.record.traces) {
      write_text_file(out / "trace.csv", format_trace_csv(result.trace, path_.dimension()));
      write_text_file(out / "swaps.csv", swaps_csv(result.swaps));
    }
    if (config_.record.online) write_text_file(out / "online.json", online_json(result.online).dump(2) + "\n");
  }

  RunConfig config_;
  EngineState state_;
  const Path& path_;
  Transport& net_;
  const RunHooks& hooks_;
  int n_;
  WorkerAssignment owners_;
  PermutedDistributedArray directory_;
  ThreadPool pool_;
  std::vector<Replica> local_;
};

}  // namespace

RunResult run(const RunConfig& config, const Path& path, Transport& transport, const RunHooks& hooks) {
  return Engine(config, initial_state(config, path), path, transport, hooks).run();
}

RunResult resume(const RunConfig& config, EngineState state, const Path& path, Transport& transport,
                 const RunHooks& hooks) {
  return Engine(config, std::move(state), path, transport, hooks).run();
}

}  // namespace roost
