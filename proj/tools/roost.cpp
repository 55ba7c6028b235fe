// roost: command-line driver for the parallel tempering engine.
//
//   roost run --target coinflip --n 100000 --y 50000 --record traces,online
//   roost resume --from out/results/latest
//   roost summarize --input out
//   roost worker --rank R ...   (spawned by run/resume for multi-process runs)

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "roost/checkpoint.hpp"
#include "roost/engine.hpp"
#include "roost/model.hpp"
#include "roost/transport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace roost;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TargetOptions {
  std::string target = "coinflip";
  long n = 100000;
  long y = 50000;
  double sep = 2.0;
  double sd = 0.5;
  int dim = 1;
  double ref_sd = 1.0;
  std::string cmd;
  std::string init;
};

struct RunOptions {
  TargetOptions target;
  int chains = 10;
  int rounds = 10;
  std::uint64_t seed = 1;
  int workers = 1;
  int threads = 1;
  std::string record = "online,round_trip";
  std::string output = "roost-out";
  bool checkpoint = false;
  std::string backend = "processes";
  std::string explorer = "slice";
  int stop_after = 0;
  int base_port = 0;  // 0: from the environment
  bool quiet = false;
};

void add_target_options(CLI::App& app, TargetOptions& t) {
  app.add_option("--target", t.target, "coinflip, bimodal, mvn or bridge")
      ->check(CLI::IsMember({"coinflip", "bimodal", "mvn", "bridge"}));
  app.add_option("--n", t.n, "coinflip: number of trials");
  app.add_option("--y", t.y, "coinflip: number of successes");
  app.add_option("--sep", t.sep, "bimodal: mode separation c");
  app.add_option("--sd", t.sd, "bimodal: component standard deviation");
  app.add_option("--dim", t.dim, "mvn / bridge: dimension");
  app.add_option("--ref-sd", t.ref_sd, "mvn: reference standard deviation");
  app.add_option("--cmd", t.cmd, "bridge: command line of the bridge process");
  app.add_option("--init", t.init, "bridge: comma-separated initial state");
}

void add_engine_options(CLI::App& app, RunOptions& o) {
  add_target_options(app, o.target);
  app.add_option("--chains", o.chains, "number of chains N");
  app.add_option("--rounds", o.rounds, "number of rounds R (round r runs 2^r scans)");
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--workers", o.workers, "number of workers M");
  app.add_option("--threads", o.threads, "exploration threads per worker");
  app.add_option("--record", o.record, "comma-separated recorders: traces,online,round_trip,disk");
  app.add_option("--output", o.output, "output directory");
  app.add_flag("--checkpoint", o.checkpoint, "write a checkpoint after every round");
  app.add_option("--backend", o.backend, "processes, threaded or sequential")
      ->check(CLI::IsMember({"processes", "threaded", "sequential"}));
  app.add_option("--explorer", o.explorer, "slice or rwm")->check(CLI::IsMember({"slice", "rwm"}));
  app.add_option("--stop-after", o.stop_after, "stop after this round, as if killed");
  app.add_option("--base-port", o.base_port, "first TCP port of the local topology");
  app.add_flag("--quiet", o.quiet, "do not print the report table");
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--init: not a number: '" + item + "'");
    }
  }
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

json describe_target(const TargetOptions& t) {
  if (t.target == "coinflip") return {{"target", "coinflip"}, {"n", t.n}, {"y", t.y}};
  if (t.target == "bimodal") return {{"target", "bimodal"}, {"sep", t.sep}, {"sd", t.sd}};
  if (t.target == "mvn") return {{"target", "mvn"}, {"dim", t.dim}, {"ref_sd", t.ref_sd}};
  return {{"target", "bridge"}, {"cmd", t.cmd}, {"dim", t.dim}, {"init", t.init}};
}

/// Builds the annealing path from a target description. Bad parameters are
/// usage errors.
Path build_path(const json& d) {
  const std::string name = d.at("target");
  try {
    if (name == "coinflip") {
      auto p = coinflip_target(d.at("n").get<long>(), d.at("y").get<long>());
      return Path::log_linear(p.reference, p.target);
    }
    if (name == "bimodal") {
      auto p = bimodal_target(d.at("sep").get<double>(), d.at("sd").get<double>());
      return Path::log_linear(p.reference, p.target);
    }
    if (name == "mvn") {
      auto p = mvn_target(d.at("dim").get<int>(), d.at("ref_sd").get<double>());
      return Path::log_linear(p.reference, p.target);
    }
    if (name == "bridge") {
      const auto cmd = split_words(d.at("cmd").get<std::string>());
      if (cmd.empty()) throw UsageError("--target bridge needs --cmd");
      const int dim = d.at("dim").get<int>();
      if (dim < 1) throw UsageError("--dim must be positive");
      auto init = parse_list(d.at("init").get<std::string>());
      if (!init.empty() && static_cast<int>(init.size()) != dim)
        throw UsageError("--init has " + std::to_string(init.size()) + " values, --dim is " +
                         std::to_string(dim));
      return child_process_path(cmd, static_cast<std::size_t>(dim), std::move(init));
    }
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  throw UsageError("unknown target '" + name + "'");
}

RunConfig build_config(const RunOptions& o) {
  RunConfig c;
  c.n_chains = o.chains;
  c.n_rounds = o.rounds;
  c.seed = o.seed;
  c.checkpoint = o.checkpoint;
  c.output_dir = o.output;
  c.n_threads = o.threads;
  c.stop_after_round = o.stop_after;
  c.explorer.kind = o.explorer == "rwm" ? ExplorerKind::rwm : ExplorerKind::slice;
  c.target_descriptor = describe_target(o.target).dump();
  try {
    c.record = RecordSet::parse(o.record);
    c.validate();
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  return c;
}

void check_topology(const RunOptions& o, int n_chains) {
  if (o.workers < 1) throw UsageError("--workers must be >= 1");
  if (o.workers > n_chains)
    throw UsageError("--workers (" + std::to_string(o.workers) + ") exceeds --chains (" +
                     std::to_string(n_chains) + ")");
  if (o.threads < 1) throw UsageError("--threads must be >= 1");
  if (o.backend == "sequential" && (o.workers != 1 || o.threads != 1))
    throw UsageError("--backend sequential runs one worker on one thread");
  if (o.base_port < 0 || o.base_port > 65535) throw UsageError("--base-port out of range");
}

int effective_base_port(const RunOptions& o) {
  return o.base_port > 0 ? o.base_port : base_port_from_environment();
}

RunHooks printing_hooks(bool quiet) {
  RunHooks hooks;
  if (quiet) return hooks;
  std::cout << report_rule() << '\n' << report_header() << '\n' << report_rule() << '\n';
  hooks.on_round = [](const RoundReport& r) { std::cout << report_row(r) << std::endl; };
  return hooks;
}

/// Arguments that make a child worker join this run as `rank`.
std::vector<std::string> worker_args(const RunOptions& o, int rank, const std::string& resume_from) {
  std::vector<std::string> a{"worker", "--rank", std::to_string(rank), "--workers",
                             std::to_string(o.workers), "--threads", std::to_string(o.threads),
                             "--base-port", std::to_string(effective_base_port(o)), "--quiet"};
  if (!resume_from.empty()) {
    a.insert(a.end(), {"--resume-from", resume_from, "--stop-after", std::to_string(o.stop_after)});
    return a;
  }
  const auto& t = o.target;
  a.insert(a.end(), {"--target", t.target, "--n", std::to_string(t.n), "--y", std::to_string(t.y),
                     "--sep", format_double(t.sep), "--sd", format_double(t.sd), "--dim",
                     std::to_string(t.dim), "--ref-sd", format_double(t.ref_sd), "--cmd", t.cmd,
                     "--init", t.init, "--chains", std::to_string(o.chains), "--rounds",
                     std::to_string(o.rounds), "--seed", std::to_string(o.seed), "--record",
                     o.record, "--output", o.output, "--explorer", o.explorer, "--stop-after",
                     std::to_string(o.stop_after)});
  if (o.checkpoint) a.push_back("--checkpoint");
  return a;
}

/// Runs `body` on the selected backend; returns the process exit status.
int execute(const RunOptions& o, const std::string& resume_from,
            const std::function<void(Transport&)>& body) {
  if (o.backend == "sequential") {
    SequentialTransport t;
    body(t);
    return kExitOk;
  }
  if (o.backend == "threaded") {
    run_threaded(o.workers, body);
    return kExitOk;
  }
  LaunchOptions launch;
  launch.workers = o.workers;
  launch.threads = o.threads;
  launch.base_port = effective_base_port(o);
  launch.worker_args = [&](int rank) { return worker_args(o, rank, resume_from); };
  return launch_local(launch, body) == 0 ? kExitOk : kExitRuntime;
}

int cmd_run(const RunOptions& o) {
  const RunConfig config = build_config(o);
  check_topology(o, config.n_chains);
  const Path path = build_path(json::parse(config.target_descriptor));
  const RunHooks hooks = printing_hooks(o.quiet);
  const int status = execute(o, "", [&](Transport& t) { run(config, path, t, hooks); });
  if (!o.quiet) std::cout << report_rule() << '\n';
  return status;
}

int cmd_worker(const RunOptions& o, int rank, const std::string& resume_from) {
  if (rank < 1 || rank > o.workers) throw UsageError("--rank must lie in 1..--workers");
  RunConfig config;
  EngineState state;
  bool resuming = !resume_from.empty();
  if (resuming) {
    Checkpoint c = read_checkpoint(resume_from);
    config = c.config;
    config.n_threads = o.threads;
    config.stop_after_round = o.stop_after;
    state = std::move(c.state);
  } else {
    config = build_config(o);
  }
  const Path path = build_path(json::parse(config.target_descriptor));
  Topology topology = o.base_port > 0 ? Topology::local(o.workers, rank, o.base_port)
                                      : Topology::from_environment(o.workers, rank);
  SocketTransport transport(topology);
  if (resuming)
    resume(config, std::move(state), path, transport);
  else
    run(config, path, transport);
  return kExitOk;
}

int cmd_resume(RunOptions o, const std::string& from, bool output_given) {
  const fs::path file = resolve_checkpoint(from);
  Checkpoint c = read_checkpoint(file);
  if (c.state.completed_rounds >= c.config.n_rounds) {
    std::cout << "run already finished (" << c.state.completed_rounds << " of " << c.config.n_rounds
              << " rounds); nothing to do\n";
    return kExitOk;
  }
  RunConfig config = c.config;
  config.n_threads = o.threads;
  config.stop_after_round = o.stop_after;
  if (output_given) config.output_dir = o.output;
  o.output = config.output_dir.string();
  check_topology(o, config.n_chains);
  const Path path = build_path(json::parse(config.target_descriptor));
  std::cout << "resuming " << file.string() << " after round " << c.state.completed_rounds << '\n';
  const RunHooks hooks = printing_hooks(o.quiet);
  if (!o.quiet)
    for (const auto& r : c.state.reports) std::cout << report_row(r) << '\n';
  const std::string resolved = fs::absolute(file).string();
  const int status = execute(o, resolved, [&](Transport& t) {
    resume(config, c.state, path, t, hooks);
  });
  if (!o.quiet) std::cout << report_rule() << '\n';
  return status;
}

// ---- summarize --------------------------------------------------------------

struct Trace {
  std::vector<std::string> columns;  // without "scan"
  std::vector<std::uint64_t> scans;
  std::vector<std::vector<double>> values;  // [column][row]
};

Trace read_trace(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read " + file.string());
  Trace t;
  std::string line;
  if (!std::getline(in, line) || line.rfind("scan", 0) != 0)
    throw IoError(file.string() + ": missing 'scan,...' header");
  std::stringstream header(line);
  std::string name;
  std::getline(header, name, ',');
  while (std::getline(header, name, ',')) t.columns.push_back(name);
  t.values.resize(t.columns.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    t.scans.push_back(std::stoull(cell));
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (!std::getline(row, cell, ','))
        throw IoError(file.string() + ": short row at scan " + std::to_string(t.scans.back()));
      t.values[c].push_back(std::stod(cell));
    }
  }
  if (t.scans.empty()) throw IoError(file.string() + ": trace has no samples");
  return t;
}

constexpr int kHistogramBins = 50;

int cmd_summarize(const fs::path& input, fs::path output) {
  const fs::path file = fs::is_directory(input) ? input / "trace.csv" : input;
  if (output.empty()) output = fs::is_directory(input) ? input : input.parent_path();
  const Trace t = read_trace(file);

  json summary = json::object();
  std::string hist_dat;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    OnlineStats s;
    for (double v : t.values[c]) s.add(std::span<const double>(&v, 1));
    const double lo = s.min[0];
    const double hi = s.max[0];
    const double width = (hi - lo) / kHistogramBins;
    std::vector<std::uint64_t> counts(kHistogramBins, 0);
    for (double v : t.values[c]) {
      int bin = width > 0.0 ? static_cast<int>((v - lo) / width) : 0;
      counts[static_cast<std::size_t>(std::clamp(bin, 0, kHistogramBins - 1))]++;
    }
    std::vector<double> edges;
    for (int b = 0; b <= kHistogramBins; ++b) edges.push_back(lo + b * width);
    summary[t.columns[c]] = {{"count", s.count},
                             {"mean", s.mean[0]},
                             {"variance", s.variance()[0]},
                             {"min", lo},
                             {"max", hi},
                             {"histogram", {{"edges", edges}, {"counts", counts}}}};
    if (c > 0) hist_dat += "\n\n";
    hist_dat += "# " + t.columns[c] + ": bin_center count\n";
    for (int b = 0; b < kHistogramBins; ++b)
      hist_dat += format_double(lo + (b + 0.5) * width) + ' ' + std::to_string(counts[static_cast<std::size_t>(b)]) + '\n';
  }

  std::string trace_dat = "# scan";
  for (const auto& c : t.columns) trace_dat += ' ' + c;
  trace_dat += '\n';
  for (std::size_t r = 0; r < t.scans.size(); ++r) {
    trace_dat += std::to_string(t.scans[r]);
    for (const auto& col : t.values) trace_dat += ' ' + format_double(col[r]);
    trace_dat += '\n';
  }

  std::string gp = "set terminal pngcairo size 900,400\n";
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    const std::string& name = t.columns[c];
    gp += "set output '" + name + "_trace.png'\nplot 'trace.dat' using 1:" + std::to_string(c + 2) +
          " with lines title '" + name + "'\n";
    gp += "set output '" + name + "_density.png'\nplot 'histogram.dat' index " + std::to_string(c) +
          " using 1:2 with boxes title '" + name + "'\n";
  }

  write_text_file(output / "summary.json", summary.dump(2) + "\n");
  write_text_file(output / "histogram.dat", hist_dat);
  write_text_file(output / "trace.dat", trace_dat);
  write_text_file(output / "plot.gp", gp);
  for (const auto& c : t.columns)
    std::printf("%-6s mean %-12.6g variance %-12.6g min %-12.6g max %-12.6g\n", c.c_str(),
                summary[c]["mean"].get<double>(), summary[c]["variance"].get<double>(),
                summary[c]["min"].get<double>(), summary[c]["max"].get<double>());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"roost: deterministic distributed non-reversible parallel tempering"};
  app.require_subcommand(1);

  RunOptions run_opts;
  auto* run_cmd = app.add_subcommand("run", "run parallel tempering on a target");
  add_engine_options(*run_cmd, run_opts);

  RunOptions worker_opts;
  int rank = 0;
  std::string resume_from;
  auto* worker_cmd = app.add_subcommand("worker", "join a multi-process run as one rank");
  add_engine_options(*worker_cmd, worker_opts);
  worker_cmd->add_option("--rank", rank, "rank of this worker")->required();
  worker_cmd->add_option("--resume-from", resume_from, "checkpoint file to continue from");

  RunOptions resume_opts;
  std::string from = "roost-out/results/latest";
  auto* resume_cmd = app.add_subcommand("resume", "continue a checkpointed run");
  resume_cmd->add_option("--from", from, "checkpoint file, run directory or 'latest' pointer");
  resume_cmd->add_option("--workers", resume_opts.workers, "number of workers M");
  resume_cmd->add_option("--threads", resume_opts.threads, "exploration threads per worker");
  auto* resume_output = resume_cmd->add_option("--output", resume_opts.output, "output directory");
  resume_cmd->add_option("--backend", resume_opts.backend, "processes, threaded or sequential")
      ->check(CLI::IsMember({"processes", "threaded", "sequential"}));
  resume_cmd->add_option("--stop-after", resume_opts.stop_after, "stop after this round");
  resume_cmd->add_option("--base-port", resume_opts.base_port, "first TCP port of the local topology");
  resume_cmd->add_flag("--quiet", resume_opts.quiet, "do not print the report table");

  std::string input;
  std::string summary_output;
  auto* summarize_cmd = app.add_subcommand("summarize", "plot-ready summary of a trace");
  summarize_cmd->add_option("--input", input, "run output directory or trace CSV")->required();
  summarize_cmd->add_option("--output", summary_output, "where to write (default: alongside the trace)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return e.get_exit_code() == 0 ? code : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run_opts);
    if (*worker_cmd) return cmd_worker(worker_opts, rank, resume_from);
    if (*resume_cmd) return cmd_resume(resume_opts, from, resume_output->count() > 0);
    if (*summarize_cmd) return cmd_summarize(input, summary_output);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
