#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "roost/bytes.hpp"
#include "roost/engine.hpp"

namespace roost {

// Checkpoint file layout (little-endian):
//   "PGNS" | version u32 | config | n_workers u32 | engine state
// Strings are u32-length-prefixed, double vectors u32-count-prefixed.

inline constexpr char kCheckpointMagic[4] = {'P', 'G', 'N', 'S'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  int n_workers = 1;
  EngineState state;
};

Bytes encode_checkpoint(const RunConfig& config, int n_workers, const EngineState& state);
/// Throws FormatError on bad magic, unsupported version or truncation.
Checkpoint decode_checkpoint(std::span<const std::byte> bytes);

void write_snapshot(ByteWriter& w, const ReplicaSnapshot& s);
ReplicaSnapshot read_snapshot(ByteReader& r);

/// Writes <output_dir>/results/all/<run_id>/round_<r>.ckpt and points
/// <output_dir>/results/latest at the run directory. Returns the file path.
std::filesystem::path write_checkpoint(const std::filesystem::path& output_dir,
                                       const RunConfig& config, int n_workers,
                                       const EngineState& state);

Checkpoint read_checkpoint(const std::filesystem::path& file);

/// Accepts a checkpoint file, a run directory (its latest round is used) or a
/// `latest` pointer file.
std::filesystem::path resolve_checkpoint(const std::filesystem::path& from);

/// Reads a whole file; IoError naming the path on failure.
Bytes read_file(const std::filesystem::path& file);
/// Writes via a temporary file and rename; IoError naming the path on failure.
void write_file(const std::filesystem::path& file, std::span<const std::byte> bytes);
void write_text_file(const std::filesystem::path& file, std::string_view text);

}  // namespace roost
