#include "raymem/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

namespace raymem {

void LoopConfig::validate() const {
  if (min_pairs < 3) throw std::invalid_argument("LoopConfig: min_pairs must be >= 3");
  if (!(info_scale > 0.0)) throw std::invalid_argument("LoopConfig: info_scale must be > 0");
  if (max_iterations < 1) throw std::invalid_argument("LoopConfig: max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw std::invalid_argument("LoopConfig: tolerance must be > 0");
  if (!(sparsify_keep_fraction > 0.0 && sparsify_keep_fraction <= 1.0)) {
    throw std::invalid_argument("LoopConfig: sparsify_keep_fraction must be in (0, 1]");
  }
  if (info_score_k < 1) throw std::invalid_argument("LoopConfig: info_score_k must be >= 1");
  if (!(max_correction_rot_deg > 0.0)) {
    throw std::invalid_argument("LoopConfig: max_correction_rot_deg must be > 0");
  }
}

void SimSpec::validate() const {
  scene.validate();
  trajectory.validate();
  noise.validate();
  if (!(max_range > 0.0)) throw std::invalid_argument("SimSpec: max_range must be > 0");
  if (!(fov_deg > 0.0 && fov_deg <= 360.0)) {
    throw std::invalid_argument("SimSpec: fov_deg must be in (0, 360]");
  }
}

StreamingPipeline::StreamingPipeline(const MemoryConfig& memory_cfg, const LoopConfig& loop_cfg)
    : memory_cfg_(memory_cfg), loop_cfg_(loop_cfg), store_(memory_cfg) {
  loop_cfg_.validate();
}

UpdateReport StreamingPipeline::process_frame(const StreamFrame& frame) {
  const FrameIndex expected = static_cast<FrameIndex>(nodes_.size());
  if (frame.frame != expected) {
    throw std::invalid_argument("pipeline: non-monotone frame");
  }
  raw_poses_.push_back(frame.pose_est);
  nodes_.push_back(compose(input_correction_, frame.pose_est));

  std::vector<ScenePointer> corrected = frame.points;
  for (ScenePointer& p : corrected) {
    if (p.frame_index != frame.frame) {
      throw std::invalid_argument("pipeline: observation frame mismatch");
    }
    p.position = transform_point(input_correction_, p.position);
    p.ray = rotate_dir(input_correction_, p.ray);
  }

  UpdateReport report = store_.insert_frame(corrected);
  for (const LoopHit& hit : report.loop_hits) {
    pending_hits_.push_back(hit);
  }
  reports_.push_back(report);

  if (loop_cfg_.enabled && !pending_hits_.empty()) {
    try_refine();
  }
  return reports_.back();
}

void StreamingPipeline::try_refine() {
  const AggregationResult agg =
      aggregate_candidates(pending_hits_, store_, loop_cfg_.min_pairs);
  if (agg.candidates.empty()) return;

  std::vector<LoopEdgeSpec> new_edges;
  std::vector<const LoopCandidate*> used;
  for (const LoopCandidate& cand : agg.candidates) {
    LoopEdgeEstimate est;
    try {
      est = estimate_loop_edge(cand, store_);
    } catch (const std::runtime_error&) {
      continue;  // degenerate constraint, candidate discarded
    }
    if (est.inlier_count < std::max(3, loop_cfg_.min_pairs)) {
      continue;  // the median pass found no consensus; mismatched pairs
    }
    if (est.correction.translation().norm() > memory_cfg_.eps_pos ||
        est.correction.rotation_angle() > loop_cfg_.max_correction_rot_deg * M_PI / 180.0) {
      continue;  // implausibly large correction; mismatched geometry
    }
    LoopEdgeSpec spec;
    spec.i = static_cast<int>(cand.old_frame);
    spec.j = static_cast<int>(cand.new_frame);
    spec.measured = loop_edge_measurement(est.correction, nodes_[spec.i], nodes_[spec.j]);
    spec.info_scale = loop_cfg_.info_scale;
    new_edges.push_back(spec);
    used.push_back(&cand);
  }
  if (new_edges.empty() || nodes_.size() < 2) return;

  // Constraints persist: every refinement re-solves the whole history with
  // the raw odometry measurements plus all loop edges found so far.
  loop_edges_.insert(loop_edges_.end(), new_edges.begin(), new_edges.end());

  OptimizeOptions options;
  options.max_iterations = loop_cfg_.max_iterations;
  options.tolerance = loop_cfg_.tolerance;
  options.huber_delta = loop_cfg_.huber_delta;
  options.robust = loop_cfg_.robust_kernel;

  auto build = [&]() {
    PoseGraph graph;
    graph.nodes = nodes_;  // current estimates initialize the solve
    for (std::size_t i = 0; i + 1 < raw_poses_.size(); ++i) {
      PoseGraphEdge e;
      e.i = static_cast<int>(i);
      e.j = static_cast<int>(i) + 1;
      e.measured = compose(inverse(raw_poses_[i]), raw_poses_[i + 1]);
      e.information = Mat6::Identity();
      e.kind = EdgeKind::kOdometry;
      graph.edges.push_back(e);
    }
    for (const LoopEdgeSpec& spec : loop_edges_) {
      PoseGraphEdge e;
      e.i = spec.i;
      e.j = spec.j;
      e.measured = spec.measured;
      e.information = spec.info_scale * Mat6::Identity();
      e.kind = EdgeKind::kLoop;
      graph.edges.push_back(e);
    }
    return graph;
  };

  LoopEvent event;
  event.frame = static_cast<FrameIndex>(nodes_.size()) - 1;
  event.n_candidates = static_cast<int>(agg.candidates.size());
  event.n_edges = static_cast<int>(new_edges.size());
  event.dropped_groups = agg.dropped_groups;

  OptimizeResult solved;
  try {
    solved = optimize(build(), options);

    // Outlier rejection on the solved graph: loop edges whose residual
    // stays far above the consensus are mismatches, not drift. Drop them
    // for good and re-solve.
    for (int round = 0; round < 2 && !loop_edges_.empty(); ++round) {
      std::vector<double> residuals;
      residuals.reserve(loop_edges_.size());
      for (const LoopEdgeSpec& spec : loop_edges_) {
        const Pose err = compose(inverse(spec.measured),
                                 compose(inverse(solved.poses[spec.i]), solved.poses[spec.j]));
        residuals.push_back(twist_to_vec(log_map(err)).norm());
      }
      std::vector<double> sorted = residuals;
      std::nth_element(sorted.begin(), sorted.begin() + (sorted.size() - 1) / 2, sorted.end());
      const double cutoff = std::max(0.05, 3.0 * sorted[(sorted.size() - 1) / 2]);
      std::vector<LoopEdgeSpec> kept;
      for (std::size_t k = 0; k < loop_edges_.size(); ++k) {
        if (residuals[k] <= cutoff) kept.push_back(loop_edges_[k]);
      }
      if (kept.size() == loop_edges_.size()) break;
      loop_edges_ = std::move(kept);
      if (loop_edges_.empty()) return;  // nothing trustworthy; leave estimates alone
      solved = optimize(build(), options);
    }
  } catch (const std::runtime_error&) {
    // Diverged: keep the current estimates untouched and drop the hits,
    // they will re-form if the overlap persists.
    pending_hits_.clear();
    return;
  }
  event.cost_initial = solved.initial_cost;
  event.cost_final = solved.final_cost;
  event.iterations = solved.iterations;

  std::map<FrameIndex, Pose> corrections;
  for (std::size_t k = 0; k < solved.deltas.size(); ++k) {
    corrections[static_cast<FrameIndex>(k)] = solved.deltas[k];
  }
  store_.reanchor(corrections);
  nodes_ = solved.poses;
  // Frames still to come ride on the latest node, so rebase them through
  // the full correction of the newest frame.
  input_correction_ = compose(nodes_.back(), inverse(raw_poses_.back()));

  if (loop_cfg_.sparsify_keep_fraction < 1.0) {
    std::set<PointerId> region;
    for (const LoopCandidate* cand : used) {
      for (const CorrespondencePair& pair : cand->pairs) {
        if (!store_.contains(pair.old_id)) continue;
        for (PointerId id :
             store_.radius_query(store_.get(pair.old_id).position, memory_cfg_.radius_r)) {
          region.insert(id);
        }
      }
    }
    const SparsifyReport sp =
        sparsify(store_, region, loop_cfg_.sparsify_keep_fraction, loop_cfg_.info_score_k);
    event.n_sparsified = sp.removed.size();
  }

  pending_hits_.clear();
  events_.push_back(event);
}

std::vector<StreamFrame> make_stream(const Scene& scene, const std::vector<Pose>& truth,
                                     const std::vector<Pose>& odometry, const SimSpec& sim) {
  std::vector<StreamFrame> stream;
  stream.reserve(truth.size());
  for (std::size_t t = 0; t < truth.size(); ++t) {
    FrameObservation obs = observe(scene, static_cast<FrameIndex>(t), truth[t], odometry[t],
                                   sim.noise, sim.max_range, sim.fov_deg, sim.occlusion);
    StreamFrame frame;
    frame.frame = obs.frame_index;
    frame.pose_est = obs.estimated_pose;
    frame.pose_true = obs.true_pose;
    frame.points = std::move(obs.observations);
    stream.push_back(std::move(frame));
  }
  return stream;
}

MetricsReport evaluate_run(const Trajectory& estimated, const Trajectory* truth,
                           const MemoryStore& store, const PointCloud* reference_cloud,
                           FrameIndex rpe_delta) {
  MetricsReport report;
  report.memory_count = static_cast<std::int64_t>(store.size());
  if (truth && truth->size() >= 2 && estimated.size() >= 2) {
    try {
      report.ate_rmse = ate_rmse(estimated, *truth);
    } catch (const std::invalid_argument&) {
      // too few common frames; leave the cell empty
    }
    try {
      const RpeResult r = rpe(estimated, *truth, rpe_delta);
      report.rpe_trans = r.trans_rmse;
      report.rpe_rot = r.rot_rmse_deg;
    } catch (const std::invalid_argument&) {
    }
  }
  if (reference_cloud && !reference_cloud->points.empty() && store.size() > 0) {
    PointCloud map_cloud;
    for (const ScenePointer* rec : store.ordered_records()) {
      map_cloud.points.push_back(rec->position);
    }
    const DistanceStats acc = accuracy(map_cloud, *reference_cloud);
    const DistanceStats comp = completeness(map_cloud, *reference_cloud);
    report.acc_mean = acc.mean;
    report.acc_median = acc.median;
    report.comp_mean = comp.mean;
    report.comp_median = comp.median;
    const int k = 10;
    if (map_cloud.points.size() > static_cast<std::size_t>(k) &&
        reference_cloud->points.size() > static_cast<std::size_t>(k)) {
      const NormalConsistencyResult nc = normal_consistency(map_cloud, *reference_cloud, k);
      report.nc_mean = nc.mean;
      report.nc_median = nc.median;
    }
  }
  return report;
}

ScenarioResult run_scenario(const SimSpec& sim, const MemoryConfig& memory_cfg,
                            const LoopConfig& loop_cfg) {
  sim.validate();
  memory_cfg.validate();
  loop_cfg.validate();

  Scene scene = generate_scene(sim.scene, memory_cfg.feature_dim);
  const std::vector<Pose> truth_poses = generate_trajectory(sim.trajectory);
  const std::vector<Pose> odom_poses = drift_odometry(truth_poses, sim.noise);
  std::vector<StreamFrame> stream = make_stream(scene, truth_poses, odom_poses, sim);

  Trajectory truth, odometry;
  for (std::size_t t = 0; t < truth_poses.size(); ++t) {
    truth.push_back({static_cast<FrameIndex>(t), truth_poses[t]});
    odometry.push_back({static_cast<FrameIndex>(t), odom_poses[t]});
  }

  StreamingPipeline pipeline(memory_cfg, loop_cfg);
  for (const StreamFrame& frame : stream) {
    pipeline.process_frame(frame);
  }
  Trajectory corrected;
  for (std::size_t t = 0; t < pipeline.node_poses().size(); ++t) {
    corrected.push_back({static_cast<FrameIndex>(t), pipeline.node_poses()[t]});
  }

  const PointCloud scene_cloud = scene.cloud();
  MetricsReport post = evaluate_run(corrected, &truth, pipeline.store(), &scene_cloud);

  MetricsReport pre = post;
  std::size_t pre_count = pipeline.store().size();
  if (loop_cfg.enabled) {
    LoopConfig no_loop = loop_cfg;
    no_loop.enabled = false;
    StreamingPipeline baseline(memory_cfg, no_loop);
    for (const StreamFrame& frame : stream) {
      baseline.process_frame(frame);
    }
    pre = evaluate_run(odometry, &truth, baseline.store(), &scene_cloud);
    pre_count = baseline.store().size();
  }

  return ScenarioResult{std::move(scene),
                        std::move(stream),
                        std::move(truth),
                        std::move(odometry),
                        std::move(corrected),
                        std::move(pre),
                        std::move(post),
                        pipeline.reports(),
                        pipeline.loop_events(),
                        std::move(pipeline.store()),
                        pre_count};
}

}  // namespace raymem
