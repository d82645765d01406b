#pragma once

#include "raymem/geometry.hpp"
#include "raymem/memory_store.hpp"

#include <optional>
#include <string>
#include <vector>

namespace raymem {

struct TrajectoryEntry {
  FrameIndex frame = 0;
  Pose pose;
};

/// Ordered pose samples; frame indices must be strictly increasing.
using Trajectory = std::vector<TrajectoryEntry>;

/// Positions with optional per-point unit normals (same length when
/// present).
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<UnitDir> normals;

  bool has_normals() const { return !normals.empty(); }
};

struct DistanceStats {
  double mean = 0.0;
  double median = 0.0;
};

struct RpeResult {
  double trans_rmse = 0.0;    // meters
  double rot_rmse_deg = 0.0;  // degrees
};

struct NormalConsistencyResult {
  double mean = 0.0;
  double median = 0.0;
  int n_degenerate = 0;  // skipped points with zero-covariance neighborhoods
};

/// Like rigid_align but tolerant of collinear or two-point sets: it still
/// returns a least-squares minimizer, just not a unique one. Trajectory
/// alignment needs this because two poses are a legal trajectory.
Pose rigid_align_relaxed(std::span<const Vec3> src, std::span<const Vec3> dst);

/// RMSE of translation residuals after rigid-aligning the estimated
/// trajectory onto ground truth (SE(3), no scale). Frames are matched by
/// index; needs at least two common frames.
double ate_rmse(const Trajectory& est, const Trajectory& gt);

/// Relative pose error over all frame pairs (f, f+delta) present in both
/// trajectories: RMSE of relative translation error and of relative
/// rotation angle error in degrees.
RpeResult rpe(const Trajectory& est, const Trajectory& gt, FrameIndex delta = 1);

/// Mean/median nearest-neighbor distance from pred points to the gt cloud.
DistanceStats accuracy(const PointCloud& pred, const PointCloud& gt);

/// The reverse direction: distances from gt points to the pred cloud.
DistanceStats completeness(const PointCloud& pred, const PointCloud& gt);

/// Mean/median |n_pred . n_gt| over predicted points matched to their
/// nearest gt point. Stored normals are used when present; otherwise each
/// normal is the smallest-eigenvalue eigenvector of the k-NN covariance.
NormalConsistencyResult normal_consistency(const PointCloud& pred, const PointCloud& gt,
                                           int k = 10);

struct MetricsReport {
  std::optional<double> ate_rmse;
  std::optional<double> rpe_trans;
  std::optional<double> rpe_rot;
  std::optional<double> acc_mean;
  std::optional<double> acc_median;
  std::optional<double> comp_mean;
  std::optional<double> comp_median;
  std::optional<double> nc_mean;
  std::optional<double> nc_median;
  std::optional<std::int64_t> memory_count;

  /// Fixed column order; absent metrics serialize as empty cells.
  static std::string csv_header();
  std::string csv_row() const;
  std::string pretty() const;
};

}  // namespace raymem
