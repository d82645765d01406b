#pragma once

#include "raymem/geometry.hpp"
#include "raymem/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace raymem {

using PointerId = std::uint64_t;
using FrameIndex = std::int64_t;

/// One landmark record: where the point is, from which direction it was
/// seen, its descriptor, and the frame that created it.
struct ScenePointer {
  PointerId id = 0;
  Vec3 position = Vec3::Zero();
  UnitDir ray;
  Eigen::VectorXf feature;
  FrameIndex frame_index = 0;
};

/// How a redundancy conflict resolves the surviving record.
enum class UpdatePolicy {
  kRetainOrReplace,  // coin flip, the default
  kKeepExisting,     // always keep the stored record
  kReplaceExisting,  // always take the new observation
  kAppendOnly,       // no conflicts at all; baseline for ablations
};

struct MemoryConfig {
  double radius_r = 0.05;     // spatial conflict search radius, meters
  double lambda_pos = 1.0;    // position weight in the joint distance
  double lambda_ang = 0.1;    // ray-angle weight in the joint distance
  double lambda_feat = 0.0;   // optional feature term, off by default
  double eps_pos = 0.05;      // loop spatial threshold, meters
  double eps_ang = 0.5;       // loop angular threshold, 1 - dot in (0, 2)
  FrameIndex delta_t_frames = 30;  // loop temporal threshold
  int feature_dim = 16;
  std::uint64_t rng_seed = 0;
  UpdatePolicy policy = UpdatePolicy::kRetainOrReplace;

  /// Throws std::invalid_argument naming the violated constraint.
  void validate() const;
};

enum class ObservationKind { kLocalRedundancy, kLoopRevisit, kNovelGeometry };

struct Classification {
  ObservationKind kind = ObservationKind::kNovelGeometry;
  std::optional<PointerId> nearest_id;  // absent iff novel
  double joint_distance = 0.0;          // to nearest_id when present
};

enum class ConflictOutcome { kKeptExisting, kReplacedWithNew };

struct LoopHit {
  ScenePointer new_pointer;  // snapshot of the inserted record
  PointerId existing_id = 0;
};

struct UpdateReport {
  FrameIndex frame_index = 0;
  int n_input = 0;
  int n_added = 0;
  int n_replaced = 0;
  int n_discarded_new = 0;
  int n_loop_flagged = 0;
  std::vector<LoopHit> loop_hits;
  std::size_t memory_size_after = 0;
};

struct MemoryStats {
  std::size_t count = 0;
  std::map<FrameIndex, std::size_t> per_frame;
  std::size_t occupied_cells = 0;
  std::size_t max_cell_load = 0;
};

/// Weighted sum of position distance, ray-angle discrepancy, and an
/// optional feature-cosine term: lambda_pos*||xa-xb|| +
/// lambda_ang*(1 - ra.rb) [+ lambda_feat*(1 - cos(fa, fb))].
double joint_distance(const ScenePointer& a, const ScenePointer& b, const MemoryConfig& cfg);

/// The persistent pointer set plus a uniform grid over cells of edge
/// radius_r (cell = floor(position / radius_r) per axis). Ownership of
/// writes is external-exclusive; reads may run concurrently between
/// writes. All mutation is deterministic given the seed and input order.
class MemoryStore {
 public:
  explicit MemoryStore(const MemoryConfig& cfg);

  const MemoryConfig& config() const { return cfg_; }
  std::size_t size() const { return records_.size(); }
  FrameIndex frame_counter() const { return frame_counter_; }
  bool contains(PointerId id) const { return records_.count(id) != 0; }
  const ScenePointer& get(PointerId id) const;

  /// Ids with ||position - x|| < r, strictly, in ascending id order.
  std::vector<PointerId> radius_query(const Vec3& x, double r) const;

  /// Three-way decision for a prospective observation: novel when no
  /// neighbor lies within radius_r; otherwise the joint-distance-nearest
  /// neighbor (ties to the lower id) is a loop revisit when it is within
  /// eps_pos, separated by more than eps_ang in ray angle, and older than
  /// delta_t_frames; else a local redundancy.
  Classification classify(const ScenePointer& incoming) const;

  /// Resolves a redundancy conflict against existing_id per the policy
  /// (one RNG draw for the coin flip). Memory size is unchanged in both
  /// branches. Throws "stale id" when existing_id is absent.
  ConflictOutcome retain_or_replace(const ScenePointer& incoming, PointerId existing_id);

  /// Streams one frame of observations, in input order. Novel records are
  /// inserted; redundancy conflicts resolve via retain_or_replace; loop
  /// revisits are inserted and flagged so both viewpoints survive for
  /// constraint estimation. All observations must carry frame_counter+1.
  UpdateReport insert_frame(const std::vector<ScenePointer>& observations);

  /// Rewrites every record under the per-frame pose delta for its
  /// creation frame (missing frames mean identity) and rebuilds the grid.
  /// Ids are preserved.
  void reanchor(const std::map<FrameIndex, Pose>& corrections);

  /// Removes the given ids (no-op entries must exist). Used by loop-region
  /// sparsification.
  void remove(const std::vector<PointerId>& ids);

  MemoryStats stats() const;

  /// Records in ascending id order (the canonical export order).
  std::vector<const ScenePointer*> ordered_records() const;

  /// Bulk load that bypasses classification (snapshot import). Assigns
  /// fresh sequential ids in input order and sets the frame counter to the
  /// largest frame index seen.
  void restore(const std::vector<ScenePointer>& records);

 private:
  struct Cell {
    std::int64_t x, y, z;
    bool operator==(const Cell&) const = default;
  };
  struct CellHash {
    std::size_t operator()(const Cell& c) const;
  };

  Cell cell_of(const Vec3& p) const;
  void grid_insert(PointerId id, const Vec3& p);
  void grid_erase(PointerId id, const Vec3& p);
  PointerId insert_record(ScenePointer rec);
  void check_feature(const ScenePointer& rec) const;

  MemoryConfig cfg_;
  std::unordered_map<PointerId, ScenePointer> records_;
  std::unordered_map<Cell, std::vector<PointerId>, CellHash> grid_;
  SplitMix64 rng_;
  FrameIndex frame_counter_ = -1;
  PointerId next_id_ = 0;
};

}  // namespace raymem
