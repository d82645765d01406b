#pragma once

#include "raymem/metrics.hpp"
#include "raymem/pipeline.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace raymem {

/// Malformed input file or configuration; the CLI maps these to exit
/// code 2. Messages carry "<path>:<line>" where a line is known.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  SimSpec sim;
  MemoryConfig memory;
  LoopConfig loop;
  bool scene_specified = false;  // ingest computes map metrics only if true

  void validate() const;
};

/// Flat `section.key = value` text format, one key per line, `#` comments.
/// Unknown keys and unparsable values raise InputError with the line
/// number. Every key has a default, so an empty file is a valid config.
ScenarioConfig parse_config_file(const std::filesystem::path& path);
ScenarioConfig parse_config_text(const std::string& text, const std::string& origin);

// --- observation stream (JSON Lines, one frame object per line) ---

void write_stream_jsonl(const std::filesystem::path& path,
                        const std::vector<StreamFrame>& frames);
/// Validates: strictly increasing frames, normalized rays, constant
/// feature length, non-empty file.
std::vector<StreamFrame> read_stream_jsonl(const std::filesystem::path& path);

// --- memory snapshot (ASCII PLY + little-endian float32 sidecar) ---

/// Vertex properties x y z nx ny nz frame_index; the normal channels hold
/// the viewing rays. Features go to the sidecar, d float32 per record in
/// vertex order. Values are written with enough digits to round-trip at
/// 32-bit precision.
void export_memory_ply(const MemoryStore& store, const std::filesystem::path& ply_path,
                       const std::filesystem::path& sidecar_path);

struct MemorySnapshot {
  std::vector<ScenePointer> records;
  int feature_dim = 0;
};

MemorySnapshot import_memory_ply(const std::filesystem::path& ply_path,
                                 const std::filesystem::path& sidecar_path);

// --- generic point clouds (PLY with optional normals) ---

void export_cloud_ply(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud read_cloud_ply(const std::filesystem::path& path);

// --- trajectories (TUM text: t tx ty tz qx qy qz qw) ---

void write_tum_trajectory(const std::filesystem::path& path, const Trajectory& trajectory);
Trajectory read_tum_trajectory(const std::filesystem::path& path);

// --- reports ---

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);

struct RunSummary {
  ScenarioConfig config;
  MetricsReport pre;
  MetricsReport post;
  std::vector<UpdateReport> frame_reports;
  std::vector<LoopEvent> loop_events;
};

/// Reproducible run manifest (config echo, seeds, per-frame update rows,
/// loop events, metrics). Contains no timestamps, so identical runs are
/// byte-identical.
void write_manifest_json(const std::filesystem::path& path, const RunSummary& summary);

/// Write-to-temp-then-rename; the destination never holds partial output.
void atomic_write(const std::filesystem::path& path, const std::string& content);

}  // namespace raymem
