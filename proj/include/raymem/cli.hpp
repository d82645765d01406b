#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace raymem::cli {

/// Stable exit codes: 0 success, 1 runtime failure, 2 input/config error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInput = 2;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;  // overrides every config seed
  std::string log_level = "info";    // debug|info|warn|error
};

/// Runs a synthetic scenario and writes the artifact set (stream.jsonl,
/// memory_final.ply + sidecar, scene.ply, trajectory_{pre,post,true}.txt,
/// metrics.csv, manifest.json) into out_dir.
int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 const GlobalOptions& opts = {});

/// Replays an observation stream through the same pipeline, producing the
/// same artifact set. Trajectory metrics need pose_true in the stream;
/// map metrics need a scene section in the config.
int cmd_ingest(const std::string& stream_path, const std::string& config_path,
               const std::string& out_dir, const GlobalOptions& opts = {});

/// Compares a predicted cloud against a reference cloud (and optionally
/// trajectories) and writes a metrics CSV.
int cmd_eval(const std::string& pred_ply, const std::string& gt_ply,
             const std::optional<std::string>& est_traj,
             const std::optional<std::string>& gt_traj, const std::string& out_csv,
             const GlobalOptions& opts = {});

}  // namespace raymem::cli
