#include "raymem/cli.hpp"

#include <CLI11.hpp>

#include <optional>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"raymem: ray-aware scene memory for streaming reconstruction"};
  app.require_subcommand(1);

  raymem::cli::GlobalOptions opts;
  std::uint64_t seed_value = 0;
  bool seed_set = false;
  app.add_option_function<std::uint64_t>(
         "--seed",
         [&](const std::uint64_t& v) {
           seed_value = v;
           seed_set = true;
         },
         "Override every config seed")
      ->expected(1);
  app.add_option("--log-level", opts.log_level, "debug|info|warn|error")
      ->default_val("info");

  std::string config_path, out_dir, stream_path;
  auto* simulate = app.add_subcommand("simulate", "Run a synthetic scenario");
  simulate->add_option("--config", config_path, "Scenario config file")->required();
  simulate->add_option("--out", out_dir, "Output directory")->required();

  std::string in_config, in_out;
  auto* ingest = app.add_subcommand("ingest", "Replay an observation stream");
  ingest->add_option("--stream", stream_path, "JSONL observation stream")->required();
  ingest->add_option("--config", in_config, "Scenario config file")->required();
  ingest->add_option("--out", in_out, "Output directory")->required();

  std::string pred_ply, gt_ply, out_csv;
  std::string est_traj, gt_traj;
  auto* eval = app.add_subcommand("eval", "Evaluate point clouds and trajectories");
  eval->add_option("--pred", pred_ply, "Predicted point cloud (PLY)")->required();
  eval->add_option("--gt", gt_ply, "Reference point cloud (PLY)")->required();
  eval->add_option("--est-traj", est_traj, "Estimated trajectory (TUM)");
  eval->add_option("--gt-traj", gt_traj, "Ground-truth trajectory (TUM)");
  eval->add_option("--out", out_csv, "Output metrics CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : raymem::cli::kExitInput;
  }

  if (seed_set) opts.seed = seed_value;

  if (simulate->parsed()) {
    return raymem::cli::cmd_simulate(config_path, out_dir, opts);
  }
  if (ingest->parsed()) {
    return raymem::cli::cmd_ingest(stream_path, in_config, in_out, opts);
  }
  return raymem::cli::cmd_eval(pred_ply, gt_ply,
                               est_traj.empty() ? std::nullopt : std::make_optional(est_traj),
                               gt_traj.empty() ? std::nullopt : std::make_optional(gt_traj),
                               out_csv, opts);
}
