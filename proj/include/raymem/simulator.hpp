#pragma once

#include "raymem/geometry.hpp"
#include "raymem/memory_store.hpp"
#include "raymem/metrics.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace raymem {

enum class SceneKind { kBoxRoom, kCorridor, kPlane };

struct SceneSpec {
  SceneKind kind = SceneKind::kBoxRoom;
  Vec3 extents{4.0, 4.0, 3.0};  // meters, centered on the origin
  double spacing = 0.1;         // surface lattice step, meters
  std::uint64_t seed = 0;

  void validate() const;
};

struct SurfacePoint {
  Vec3 position;
  UnitDir normal;  // points into the observable half-space
  std::uint64_t id = 0;
  Eigen::VectorXf descriptor;  // stable per-id pseudo-random, components in [-1, 1]
};

struct Scene {
  SceneSpec spec;
  std::vector<SurfacePoint> points;

  PointCloud cloud() const;
};

enum class TrajectoryKind { kSquareLoop, kStraightLine, kFigureEight };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kSquareLoop;
  int n_frames = 100;
  double speed = 0.05;  // meters per frame
  int laps = 1;         // square loop circuits within n_frames
  bool revisit_with_reverse_heading = false;

  void validate() const;
};

struct NoiseSpec {
  double point_noise_sigma = 0.0;        // meters, camera-frame position noise
  double odometry_trans_sigma = 0.0;     // meters per frame
  double odometry_yaw_bias_deg = 0.0;    // degrees per frame
  double feature_noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One frame of input to the memory pipeline: the drifted pose estimate,
/// the held-out true pose, and ray-carrying point observations expressed
/// in the estimated world frame.
struct FrameObservation {
  FrameIndex frame_index = 0;
  Pose estimated_pose;
  Pose true_pose;
  std::vector<ScenePointer> observations;
};

/// Deterministic lattice sampling of the scene surfaces; descriptors are
/// seeded hashes of the point id expanded to feature_dim reals in [-1, 1].
Scene generate_scene(const SceneSpec& spec, int feature_dim);

/// Ground-truth camera path. Headings are tangent to the path (the camera
/// faces along local +x). With revisit_with_reverse_heading the square
/// loop closes early and the remaining frames retrace the first leg
/// facing the opposite way.
std::vector<Pose> generate_trajectory(const TrajectorySpec& spec);

/// Integrates the true relative steps perturbed by the per-frame yaw bias
/// and translation noise; estimated[0] equals the true start pose.
std::vector<Pose> drift_odometry(const std::vector<Pose>& true_poses, const NoiseSpec& noise);

/// Selects scene points within max_range and the fov cone of the true
/// pose, then reconstructs them through the estimated pose; this is how
/// odometry drift corrupts the map. Rays emanate from the estimated
/// camera center. Noise draws are a pure function of (noise.seed,
/// frame_index), so frames can be generated independently.
FrameObservation observe(const Scene& scene, FrameIndex frame_index, const Pose& true_pose,
                         const Pose& estimated_pose, const NoiseSpec& noise, double max_range,
                         double fov_deg, bool backface_cull = false);

}  // namespace raymem
