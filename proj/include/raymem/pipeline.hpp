#pragma once

#include "raymem/loop_closure.hpp"
#include "raymem/memory_store.hpp"
#include "raymem/metrics.hpp"
#include "raymem/simulator.hpp"

#include <optional>
#include <vector>

namespace raymem {

struct LoopConfig {
  bool enabled = true;
  int min_pairs = 5;
  double info_scale = 10.0;  // loop edges vs identity odometry information
  double huber_delta = 0.1;
  bool robust_kernel = true;
  int max_iterations = 50;
  double tolerance = 1e-10;
  double sparsify_keep_fraction = 1.0;  // 1 disables sparsification
  int info_score_k = 8;
  // Plausibility bound on an estimated correction's rotation; the
  // translation bound is eps_pos itself (the association radius that
  // produced the correspondences). Corrections beyond either are
  // mismatched geometry, not drift.
  double max_correction_rot_deg = 45.0;

  void validate() const;
};

/// One raw input frame, either simulator output or an ingested stream
/// record. Poses and points are in the uncorrected odometry frame; the
/// pipeline applies its own running correction.
struct StreamFrame {
  FrameIndex frame = 0;
  Pose pose_est;
  std::optional<Pose> pose_true;
  std::vector<ScenePointer> points;  // frame_index must equal frame
};

struct LoopEvent {
  FrameIndex frame = 0;
  int n_candidates = 0;
  int n_edges = 0;
  int dropped_groups = 0;
  double cost_initial = 0.0;
  double cost_final = 0.0;
  int iterations = 0;
  std::size_t n_sparsified = 0;
};

/// Consumes a raw observation stream: inserts each frame into the memory,
/// and when aggregated loop candidates appear at end of frame, estimates
/// loop edges, refines the pose graph, re-anchors the memory, and
/// sparsifies the loop region. Incoming frames after a refinement are
/// rebased through the latest correction so the stream stays consistent.
class StreamingPipeline {
 public:
  StreamingPipeline(const MemoryConfig& memory_cfg, const LoopConfig& loop_cfg);

  UpdateReport process_frame(const StreamFrame& frame);

  const MemoryStore& store() const { return store_; }
  MemoryStore& store() { return store_; }
  const std::vector<Pose>& node_poses() const { return nodes_; }
  const std::vector<UpdateReport>& reports() const { return reports_; }
  const std::vector<LoopEvent>& loop_events() const { return events_; }

 private:
  void try_refine();

  MemoryConfig memory_cfg_;
  LoopConfig loop_cfg_;
  MemoryStore store_;
  std::vector<Pose> raw_poses_;   // odometry as received; the measurements
  std::vector<Pose> nodes_;       // current corrected per-frame estimates
  Pose input_correction_;         // left-applied to every incoming frame
  std::vector<LoopEdgeSpec> loop_edges_;  // accumulated across refinements
  std::vector<LoopHit> pending_hits_;
  std::vector<UpdateReport> reports_;
  std::vector<LoopEvent> events_;
};

struct SimSpec {
  SceneSpec scene;
  TrajectorySpec trajectory;
  NoiseSpec noise;
  double max_range = 6.0;
  double fov_deg = 100.0;
  bool occlusion = false;  // backface culling of surface points

  void validate() const;
};

struct ScenarioResult {
  Scene scene;
  std::vector<StreamFrame> stream;  // raw, pre-correction
  Trajectory truth;
  Trajectory odometry;   // raw drifted estimates
  Trajectory corrected;  // after refinement (equals odometry when loops are off)
  MetricsReport pre;     // loop closure disabled
  MetricsReport post;    // as configured
  std::vector<UpdateReport> frame_reports;
  std::vector<LoopEvent> loop_events;
  MemoryStore final_store;
  std::size_t pre_memory_count = 0;
};

/// Generates the raw stream from the specs and runs it through the
/// pipeline twice: once as configured and once with loop closure
/// disabled, so before/after metrics come from the same input. Fully
/// deterministic per seeds.
ScenarioResult run_scenario(const SimSpec& sim, const MemoryConfig& memory_cfg,
                            const LoopConfig& loop_cfg);

/// Converts simulator frames into raw stream frames.
std::vector<StreamFrame> make_stream(const Scene& scene, const std::vector<Pose>& truth,
                                     const std::vector<Pose>& odometry, const SimSpec& sim);

/// Metrics of a finished run against optional ground truth: trajectory
/// errors when true poses exist, reconstruction errors when a reference
/// cloud exists. Absent inputs leave the corresponding metrics empty.
MetricsReport evaluate_run(const Trajectory& estimated, const Trajectory* truth,
                           const MemoryStore& store, const PointCloud* reference_cloud,
                           FrameIndex rpe_delta = 1);

}  // namespace raymem
