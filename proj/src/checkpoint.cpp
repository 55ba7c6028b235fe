#include "roost/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <regex>
#include <system_error>

namespace roost {

namespace fs = std::filesystem;

namespace {

void write_rng(ByteWriter& w, const SplittableRng& rng) { w.put(rng.seed()).put(rng.gamma()); }

SplittableRng read_rng(ByteReader& r) {
  const auto seed = r.get<std::uint64_t>();
  const auto gamma = r.get<std::uint64_t>();
  if (gamma % 2 == 0) throw FormatError("checkpoint: stream increment must be odd");
  return SplittableRng(seed, gamma);
}

void write_config(ByteWriter& w, const RunConfig& c) {
  w.put<std::int32_t>(c.n_chains).put<std::int32_t>(c.n_rounds).put(c.seed);
  w.put_string(c.record.to_string());
  w.put<std::uint8_t>(c.checkpoint ? 1 : 0);
  w.put<std::uint8_t>(c.explorer.kind == ExplorerKind::slice ? 0 : 1);
  w.put(c.explorer.slice_width).put<std::int32_t>(c.explorer.slice_max_doublings);
  w.put(c.explorer.rwm_step).put<std::int32_t>(c.explorer.passes_per_scan);
  w.put_string(c.output_dir.string());
  w.put<std::int32_t>(c.n_threads);
  w.put_string(c.target_descriptor);
}

RunConfig read_config(ByteReader& r) {
  RunConfig c;
  c.n_chains = r.get<std::int32_t>();
  c.n_rounds = r.get<std::int32_t>();
  c.seed = r.get<std::uint64_t>();
  c.record = RecordSet::parse(r.get_string());
  c.checkpoint = r.get<std::uint8_t>() != 0;
  c.explorer.kind = r.get<std::uint8_t>() == 0 ? ExplorerKind::slice : ExplorerKind::rwm;
  c.explorer.slice_width = r.get<double>();
  c.explorer.slice_max_doublings = r.get<std::int32_t>();
  c.explorer.rwm_step = r.get<double>();
  c.explorer.passes_per_scan = r.get<std::int32_t>();
  c.output_dir = r.get_string();
  c.n_threads = r.get<std::int32_t>();
  c.target_descriptor = r.get_string();
  return c;
}

void write_report(ByteWriter& w, const RoundReport& rep) {
  w.put<std::int32_t>(rep.round).put(rep.scans).put(rep.restarts).put(rep.round_trips);
  w.put(rep.lambda).put(rep.time_s).put(rep.log_z_ratio).put(rep.min_alpha).put(rep.mean_alpha);
}

RoundReport read_report(ByteReader& r) {
  RoundReport rep;
  rep.round = r.get<std::int32_t>();
  rep.scans = r.get<std::uint64_t>();
  rep.restarts = r.get<std::uint64_t>();
  rep.round_trips = r.get<std::uint64_t>();
  rep.lambda = r.get<double>();
  rep.time_s = r.get<double>();
  rep.log_z_ratio = r.get<double>();
  rep.min_alpha = r.get<double>();
  rep.mean_alpha = r.get<double>();
  return rep;
}

Schedule read_schedule(ByteReader& r) {
  try {
    return Schedule(r.get_doubles());
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("checkpoint: invalid schedule: ") + e.what());
  }
}

}  // namespace

void write_snapshot(ByteWriter& w, const ReplicaSnapshot& s) {
  w.put<std::int32_t>(s.index).put<std::int32_t>(s.chain).put_doubles(s.state);
  write_rng(w, s.rng);
  w.put(static_cast<std::uint8_t>(s.round_trip.flag));
  w.put(s.round_trip.restarts).put(s.round_trip.round_trips);
}

ReplicaSnapshot read_snapshot(ByteReader& r) {
  ReplicaSnapshot s;
  s.index = r.get<std::int32_t>();
  s.chain = r.get<std::int32_t>();
  s.state = r.get_doubles();
  s.rng = read_rng(r);
  const auto flag = r.get<std::uint8_t>();
  if (flag > 2) throw FormatError("checkpoint: invalid round trip flag");
  s.round_trip.flag = static_cast<RoundTripState::Flag>(flag);
  s.round_trip.restarts = r.get<std::uint64_t>();
  s.round_trip.round_trips = r.get<std::uint64_t>();
  return s;
}

Bytes encode_checkpoint(const RunConfig& config, int n_workers, const EngineState& state) {
  ByteWriter w;
  w.put_bytes(std::as_bytes(std::span(kCheckpointMagic)));
  w.put(kCheckpointVersion);
  write_config(w, config);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(n_workers));

  w.put<std::int32_t>(state.completed_rounds).put(state.scan_counter);
  w.put_doubles(state.schedule.betas());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(state.schedule_history.size()));
  for (const auto& s : state.schedule_history) w.put_doubles(s.betas());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(state.reports.size()));
  for (const auto& rep : state.reports) write_report(w, rep);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(state.replicas.size()));
  for (const auto& s : state.replicas) write_snapshot(w, s);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(state.directory.size()));
  for (int h : state.directory) w.put<std::int32_t>(h);
  write_rng(w, state.adaptation_rng);
  w.put_string(state.run_id);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 ||
      !std::equal(bytes.begin(), bytes.begin() + 4, std::as_bytes(std::span(kCheckpointMagic)).begin()))
    throw FormatError("not a checkpoint: bad magic bytes");
  r.get_bytes(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint format version " + std::to_string(version) +
                      " is not supported (this build reads version " +
                      std::to_string(kCheckpointVersion) + ")");
  Checkpoint c;
  c.config = read_config(r);
  c.n_workers = static_cast<int>(r.get<std::uint32_t>());

  EngineState& s = c.state;
  s.completed_rounds = r.get<std::int32_t>();
  s.scan_counter = r.get<std::uint64_t>();
  s.schedule = read_schedule(r);
  const auto n_hist = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_hist; ++i) s.schedule_history.push_back(read_schedule(r));
  const auto n_rep = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_rep; ++i) s.reports.push_back(read_report(r));
  const auto n_replicas = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_replicas; ++i) s.replicas.push_back(read_snapshot(r));
  const auto n_dir = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_dir; ++i) s.directory.push_back(r.get<std::int32_t>());
  s.adaptation_rng = read_rng(r);
  s.run_id = r.get_string();
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");

  const auto n = static_cast<std::size_t>(c.config.n_chains);
  if (s.replicas.size() != n || s.directory.size() != n ||
      s.schedule.n_chains() != c.config.n_chains)
    throw FormatError("checkpoint: replica, directory and schedule sizes disagree");
  return c;
}

Bytes read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("cannot read " + file.string());
  Bytes out(raw.size());
  std::transform(raw.begin(), raw.end(), out.begin(), [](char c) { return std::byte(c); });
  return out;
}

void write_file(const fs::path& file, std::span<const std::byte> bytes) {
  std::error_code ec;
  if (file.has_parent_path()) {
    fs::create_directories(file.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + file.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, file, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + file.string() + ": " + ec.message());
}

void write_text_file(const fs::path& file, std::string_view text) {
  write_file(file, std::as_bytes(std::span(text.data(), text.size())));
}

fs::path write_checkpoint(const fs::path& output_dir, const RunConfig& config, int n_workers,
                          const EngineState& state) {
  if (state.run_id.empty()) throw PreconditionError("checkpoint: run id is not set");
  const fs::path run_dir = output_dir / "results" / "all" / state.run_id;
  const fs::path file = run_dir / ("round_" + std::to_string(state.completed_rounds) + ".ckpt");
  write_file(file, encode_checkpoint(config, n_workers, state));
  std::error_code ec;
  const fs::path absolute = fs::absolute(run_dir, ec);
  write_text_file(output_dir / "results" / "latest", (ec ? run_dir : absolute).string() + "\n");
  return file;
}

Checkpoint read_checkpoint(const fs::path& file) { return decode_checkpoint(read_file(file)); }

fs::path resolve_checkpoint(const fs::path& from) {
  std::error_code ec;
  fs::path target = from;
  if (fs::is_regular_file(target, ec) && target.extension() != ".ckpt") {
    // A pointer file holding the run directory.
    const Bytes b = read_file(target);
    std::string text(reinterpret_cast<const char*>(b.data()), b.size());
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' '))
      text.pop_back();
    target = text;
  }
  if (fs::is_regular_file(target, ec)) return target;
  if (!fs::is_directory(target, ec)) throw IoError("no checkpoint at " + from.string());

  static const std::regex pattern(R"(round_(\d+)\.ckpt)");
  int best = -1;
  fs::path best_path;
  for (const auto& entry : fs::directory_iterator(target, ec)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) {
      const int round = std::stoi(m[1]);
      if (round > best) {
        best = round;
        best_path = entry.path();
      }
    }
  }
  if (ec) throw IoError("cannot list " + target.string() + ": " + ec.message());
  if (best < 0) throw IoError("no round_<r>.ckpt files in " + target.string());
  return best_path;
}

}  // namespace roost
