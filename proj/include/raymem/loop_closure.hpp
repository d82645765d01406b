#pragma once

#include "raymem/geometry.hpp"
#include "raymem/memory_store.hpp"

#include <iosfwd>
#include <map>
#include <set>
#include <vector>

namespace raymem {

struct CorrespondencePair {
  Vec3 new_position;
  UnitDir new_ray;
  PointerId old_id = 0;
};

/// A frame pair linked by enough pointer-level loop hits to attempt a
/// pose constraint. |new_frame - old_frame| exceeds delta_t_frames by
/// construction of the hits.
struct LoopCandidate {
  FrameIndex new_frame = 0;
  FrameIndex old_frame = 0;
  std::vector<CorrespondencePair> pairs;
};

struct AggregationResult {
  std::vector<LoopCandidate> candidates;
  int dropped_groups = 0;  // below min_pairs, collinear, or stale ids
};

/// Groups pointer-level hits by new frame, clustering old frames that lie
/// within a few frames of each other (the update coin scatters creation
/// frames, so exact old-frame matches are rare). Keeps clusters with at
/// least min_pairs correspondences whose old positions are non-collinear;
/// the cluster's median old frame becomes the candidate's old_frame. Hits
/// whose old pointer has since been removed are skipped.
AggregationResult aggregate_candidates(const std::vector<LoopHit>& hits, const MemoryStore& store,
                                       int min_pairs);

struct LoopEdgeEstimate {
  /// World-frame correction aligning the new-frame observations onto the
  /// stored old pointers; identity when the map is already consistent.
  Pose correction;
  int inlier_count = 0;
  int input_pairs = 0;
};

/// Rigid alignment of the candidate's correspondences followed by one
/// refit that drops residuals above 3x the median. Throws "degenerate
/// loop constraint" when the inlier set collapses.
LoopEdgeEstimate estimate_loop_edge(const LoopCandidate& candidate, const MemoryStore& store);

/// Relative-pose measurement the correction implies between the two frame
/// nodes: inverse(old_node) * correction * new_node.
Pose loop_edge_measurement(const Pose& correction, const Pose& old_node, const Pose& new_node);

enum class EdgeKind { kOdometry, kLoop };

struct PoseGraphEdge {
  int i = 0;
  int j = 0;
  Pose measured;  // expected inverse(P_i) * P_j
  Mat6 information = Mat6::Identity();
  EdgeKind kind = EdgeKind::kOdometry;
};

/// Per-frame SE(3) nodes with odometry and loop edges. Node 0 is the
/// gauge and is held fixed by the optimizer.
struct PoseGraph {
  std::vector<Pose> nodes;
  std::vector<PoseGraphEdge> edges;
};

struct LoopEdgeSpec {
  int i = 0;  // old frame
  int j = 0;  // new frame
  Pose measured;
  double info_scale = 10.0;
};

/// Nodes from the odometry chain, consecutive odometry edges with
/// identity information, and the given loop edges scaled by their
/// info_scale. Throws when a loop edge references an out-of-range frame.
PoseGraph build_graph(const std::vector<Pose>& odometry, const std::vector<LoopEdgeSpec>& loops);

struct OptimizeOptions {
  int max_iterations = 50;
  double tolerance = 1e-10;
  double huber_delta = 0.1;  // on the weighted residual norm
  bool robust = true;
};

struct OptimizeResult {
  std::vector<Pose> poses;
  std::vector<Pose> deltas;  // corrected * inverse(initial), per node
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
};

/// Gauss-Newton on se(3) with node 0 fixed, right-multiplicative updates,
/// Huber-weighted edges, and backtracking so the cost never increases
/// across accepted steps. Throws "diverged" on a non-finite cost.
OptimizeResult optimize(const PoseGraph& graph, const OptimizeOptions& options = {});

double graph_cost(const PoseGraph& graph, const std::vector<Pose>& nodes,
                  const OptimizeOptions& options);

using InfoScore = std::map<PointerId, double>;

/// Ray-diversity score per pointer: the sum of the two largest
/// eigenvalues of the normalized ray scatter over its k nearest spatial
/// neighbors inside the region (all available when fewer than k).
InfoScore info_score(const MemoryStore& store, const std::set<PointerId>& region, int k);

struct SparsifyReport {
  std::size_t region_size = 0;
  std::size_t kept = 0;
  std::vector<PointerId> removed;
};

/// Keeps the ceil(keep_fraction * |region|) highest-scoring pointers
/// (ties to the lower id) and removes the rest from the store.
SparsifyReport sparsify(MemoryStore& store, const std::set<PointerId>& region,
                        double keep_fraction, int k);

/// g2o-style text dump (VERTEX_SE3:QUAT / EDGE_SE3:QUAT lines) for
/// debugging against external solvers.
void dump_g2o(const PoseGraph& graph, std::ostream& os);

}  // namespace raymem
