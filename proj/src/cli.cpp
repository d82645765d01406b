#include "raymem/cli.hpp"

#include "raymem/io.hpp"
#include "raymem/pipeline.hpp"

#include <filesystem>
#include <iostream>

namespace raymem::cli {

namespace {

namespace fs = std::filesystem;

int log_threshold = 1;  // 0 debug, 1 info, 2 warn, 3 error

void set_log_level(const std::string& level) {
  if (level == "debug") log_threshold = 0;
  else if (level == "info") log_threshold = 1;
  else if (level == "warn") log_threshold = 2;
  else if (level == "error") log_threshold = 3;
  else throw InputError("unknown log level '" + level + "'");
}

void log_info(const std::string& msg) {
  if (log_threshold <= 1) std::cerr << "[info] " << msg << "\n";
}

void apply_overrides(ScenarioConfig& cfg, const GlobalOptions& opts) {
  if (opts.seed) {
    cfg.sim.scene.seed = *opts.seed;
    cfg.sim.noise.seed = *opts.seed;
    cfg.memory.rng_seed = *opts.seed;
  }
}

struct PipelineOutputs {
  Trajectory corrected;
  std::vector<UpdateReport> reports;
  std::vector<LoopEvent> events;
  MemoryStore store;
  MetricsReport pre;
  MetricsReport post;
};

/// Shared by simulate and ingest: consume the raw stream as configured,
/// then once more with loop closure off for the before-refinement
/// metrics. Frame ids must already be consecutive from 0; `original`
/// carries the caller's frame labels for trajectory matching.
PipelineOutputs consume_stream(const std::vector<StreamFrame>& stream,
                               const std::vector<FrameIndex>& original,
                               const ScenarioConfig& cfg, const PointCloud* scene_cloud) {
  Trajectory truth, odometry;
  bool have_truth = true;
  for (std::size_t t = 0; t < stream.size(); ++t) {
    odometry.push_back({original[t], stream[t].pose_est});
    if (stream[t].pose_true) {
      truth.push_back({original[t], *stream[t].pose_true});
    } else {
      have_truth = false;
    }
  }

  StreamingPipeline pipeline(cfg.memory, cfg.loop);
  for (const StreamFrame& f : stream) pipeline.process_frame(f);

  Trajectory corrected;
  for (std::size_t t = 0; t < pipeline.node_poses().size(); ++t) {
    corrected.push_back({original[t], pipeline.node_poses()[t]});
  }

  const Trajectory* truth_ptr = have_truth ? &truth : nullptr;
  MetricsReport post = evaluate_run(corrected, truth_ptr, pipeline.store(), scene_cloud);

  MetricsReport pre = post;
  if (cfg.loop.enabled) {
    LoopConfig no_loop = cfg.loop;
    no_loop.enabled = false;
    StreamingPipeline baseline(cfg.memory, no_loop);
    for (const StreamFrame& f : stream) baseline.process_frame(f);
    pre = evaluate_run(odometry, truth_ptr, baseline.store(), scene_cloud);
  }

  return PipelineOutputs{std::move(corrected), pipeline.reports(), pipeline.loop_events(),
                         std::move(pipeline.store()), std::move(pre), std::move(post)};
}

void write_artifacts(const fs::path& out_dir, const std::vector<StreamFrame>& stream,
                     const std::vector<FrameIndex>& original, const ScenarioConfig& cfg,
                     const PointCloud* scene_cloud, const PipelineOutputs& outputs) {
  fs::create_directories(out_dir);

  write_stream_jsonl(out_dir / "stream.jsonl", stream);
  export_memory_ply(outputs.store, out_dir / "memory_final.ply",
                    out_dir / "memory_final.features.bin");
  if (scene_cloud) {
    export_cloud_ply(*scene_cloud, out_dir / "scene.ply");
  }

  Trajectory pre_traj, true_traj;
  bool have_truth = true;
  for (std::size_t t = 0; t < stream.size(); ++t) {
    pre_traj.push_back({original[t], stream[t].pose_est});
    if (stream[t].pose_true) {
      true_traj.push_back({original[t], *stream[t].pose_true});
    } else {
      have_truth = false;
    }
  }
  write_tum_trajectory(out_dir / "trajectory_pre.txt", pre_traj);
  write_tum_trajectory(out_dir / "trajectory_post.txt", outputs.corrected);
  if (have_truth) {
    write_tum_trajectory(out_dir / "trajectory_true.txt", true_traj);
  }

  write_metrics_csv(out_dir / "metrics.csv", outputs.post);
  write_manifest_json(out_dir / "manifest.json",
                      RunSummary{cfg, outputs.pre, outputs.post, outputs.reports, outputs.events});
}

void print_report(const MetricsReport& pre, const MetricsReport& post) {
  std::cout << "pre-refinement:\n" << pre.pretty();
  std::cout << "post-refinement:\n" << post.pretty();
}

}  // namespace

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 const GlobalOptions& opts) {
  ScenarioConfig cfg;
  try {
    set_log_level(opts.log_level);
    cfg = parse_config_file(config_path);
    apply_overrides(cfg, opts);
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    // Simulate shares the exact consumption path with ingest: generate the
    // raw stream, then feed it through the same pipeline runner.
    const Scene scene = generate_scene(cfg.sim.scene, cfg.memory.feature_dim);
    const std::vector<Pose> truth = generate_trajectory(cfg.sim.trajectory);
    const std::vector<Pose> odometry = drift_odometry(truth, cfg.sim.noise);
    const std::vector<StreamFrame> stream = make_stream(scene, truth, odometry, cfg.sim);

    std::vector<FrameIndex> original;
    for (const StreamFrame& f : stream) original.push_back(f.frame);
    const PointCloud scene_cloud = scene.cloud();

    PipelineOutputs outputs = consume_stream(stream, original, cfg, &scene_cloud);
    log_info("simulated " + std::to_string(stream.size()) + " frames, " +
             std::to_string(outputs.events.size()) + " loop refinements");
    write_artifacts(out_dir, stream, original, cfg, &scene_cloud, outputs);
    print_report(outputs.pre, outputs.post);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_ingest(const std::string& stream_path, const std::string& config_path,
               const std::string& out_dir, const GlobalOptions& opts) {
  ScenarioConfig cfg;
  std::vector<StreamFrame> stream;
  try {
    set_log_level(opts.log_level);
    cfg = parse_config_file(config_path);
    apply_overrides(cfg, opts);
    cfg.validate();
    stream = read_stream_jsonl(stream_path);
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    // The pipeline counts frames consecutively from 0; keep the stream's
    // own labels for trajectory output and remap internally.
    std::vector<FrameIndex> original;
    original.reserve(stream.size());
    for (std::size_t t = 0; t < stream.size(); ++t) {
      original.push_back(stream[t].frame);
      stream[t].frame = static_cast<FrameIndex>(t);
      for (ScenePointer& p : stream[t].points) p.frame_index = static_cast<FrameIndex>(t);
    }

    std::optional<Scene> scene;
    std::optional<PointCloud> scene_cloud;
    if (cfg.scene_specified) {
      scene = generate_scene(cfg.sim.scene, cfg.memory.feature_dim);
      scene_cloud = scene->cloud();
    }

    PipelineOutputs outputs =
        consume_stream(stream, original, cfg, scene_cloud ? &*scene_cloud : nullptr);
    log_info("ingested " + std::to_string(stream.size()) + " frames, " +
             std::to_string(outputs.events.size()) + " loop refinements");
    write_artifacts(out_dir, stream, original, cfg, scene_cloud ? &*scene_cloud : nullptr,
                    outputs);
    print_report(outputs.pre, outputs.post);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_eval(const std::string& pred_ply, const std::string& gt_ply,
             const std::optional<std::string>& est_traj,
             const std::optional<std::string>& gt_traj, const std::string& out_csv,
             const GlobalOptions& opts) {
  PointCloud pred, gt;
  std::optional<Trajectory> est, truth;
  try {
    set_log_level(opts.log_level);
    pred = read_cloud_ply(pred_ply);
    gt = read_cloud_ply(gt_ply);
    if (pred.points.empty() || gt.points.empty()) {
      throw InputError("eval: empty point cloud");
    }
    if (est_traj.has_value() != gt_traj.has_value()) {
      throw InputError("eval: --est-traj and --gt-traj must be given together");
    }
    if (est_traj) {
      est = read_tum_trajectory(*est_traj);
      truth = read_tum_trajectory(*gt_traj);
    }
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    MetricsReport report;
    report.memory_count = static_cast<std::int64_t>(pred.points.size());
    const DistanceStats acc = accuracy(pred, gt);
    const DistanceStats comp = completeness(pred, gt);
    report.acc_mean = acc.mean;
    report.acc_median = acc.median;
    report.comp_mean = comp.mean;
    report.comp_median = comp.median;
    const int k = 10;
    if (pred.points.size() > static_cast<std::size_t>(k) &&
        gt.points.size() > static_cast<std::size_t>(k)) {
      const NormalConsistencyResult nc = normal_consistency(pred, gt, k);
      report.nc_mean = nc.mean;
      report.nc_median = nc.median;
    }
    if (est && truth) {
      report.ate_rmse = ate_rmse(*est, *truth);
      const RpeResult r = rpe(*est, *truth, 1);
      report.rpe_trans = r.trans_rmse;
      report.rpe_rot = r.rot_rmse_deg;
    }
    write_metrics_csv(out_csv, report);
    std::cout << report.pretty();
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace raymem::cli
