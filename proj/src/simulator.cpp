#include "raymem/simulator.hpp"

#include <cmath>
#include <stdexcept>

namespace raymem {

namespace {

int lattice_count(double extent, double spacing) {
  return static_cast<int>(std::floor(extent / spacing + 1e-9)) + 1;
}

Eigen::VectorXf make_descriptor(std::uint64_t scene_seed, std::uint64_t point_id,
                                int feature_dim) {
  SplitMix64 g(mix_hash(scene_seed, point_id));
  Eigen::VectorXf f(feature_dim);
  for (int i = 0; i < feature_dim; ++i) {
    f(i) = static_cast<float>(2.0 * g.next_double() - 1.0);
  }
  return f;
}

/// Samples an axis-aligned rectangle: origin corner, two edge vectors, and
/// a constant normal.
void sample_face(std::vector<SurfacePoint>& out, const Vec3& origin, const Vec3& edge_u,
                 const Vec3& edge_v, const Vec3& normal, double spacing,
                 std::uint64_t scene_seed, int feature_dim) {
  const int nu = lattice_count(edge_u.norm(), spacing);
  const int nv = lattice_count(edge_v.norm(), spacing);
  const Vec3 du = edge_u.normalized() * spacing;
  const Vec3 dv = edge_v.normalized() * spacing;
  for (int iu = 0; iu < nu; ++iu) {
    for (int iv = 0; iv < nv; ++iv) {
      SurfacePoint p;
      p.position = origin + iu * du + iv * dv;
      p.normal = UnitDir(normal);
      p.id = out.size();
      p.descriptor = make_descriptor(scene_seed, p.id, feature_dim);
      out.push_back(std::move(p));
    }
  }
}

double yaw_of_direction(const Vec3& d) { return std::atan2(d.y(), d.x()); }

Pose pose_at(const Vec3& position, double yaw) {
  return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ())), position);
}

/// Point and heading at arclength s along the CCW square with corners
/// (+-L/2, +-L/2), starting at (-L/2, -L/2) heading +x.
void square_point(double s, double side, Vec3& position, double& yaw) {
  const double perimeter = 4.0 * side;
  s = std::fmod(s, perimeter);
  if (s < 0.0) s += perimeter;
  const double h = side / 2.0;
  const int leg = static_cast<int>(s / side);
  const double along = s - leg * side;
  switch (leg) {
    case 0:
      position = Vec3(-h + along, -h, 0.0);
      yaw = 0.0;
      break;
    case 1:
      position = Vec3(h, -h + along, 0.0);
      yaw = M_PI / 2.0;
      break;
    case 2:
      position = Vec3(h - along, h, 0.0);
      yaw = M_PI;
      break;
    default:
      position = Vec3(-h, h - along, 0.0);
      yaw = -M_PI / 2.0;
      break;
  }
}

}  // namespace

void SceneSpec::validate() const {
  if (!(extents.minCoeff() > 0.0)) throw std::invalid_argument("SceneSpec: extents must be > 0");
  if (!(spacing > 0.0)) throw std::invalid_argument("SceneSpec: spacing must be > 0");
}

void TrajectorySpec::validate() const {
  if (n_frames < 2) throw std::invalid_argument("TrajectorySpec: n_frames must be >= 2");
  if (!(speed > 0.0)) throw std::invalid_argument("TrajectorySpec: speed must be > 0");
  if (laps < 1) throw std::invalid_argument("TrajectorySpec: laps must be >= 1");
}

void NoiseSpec::validate() const {
  if (point_noise_sigma < 0.0 || odometry_trans_sigma < 0.0 || feature_noise_sigma < 0.0) {
    throw std::invalid_argument("NoiseSpec: sigmas must be >= 0");
  }
}

PointCloud Scene::cloud() const {
  PointCloud c;
  c.points.reserve(points.size());
  c.normals.reserve(points.size());
  for (const SurfacePoint& p : points) {
    c.points.push_back(p.position);
    c.normals.push_back(p.normal);
  }
  return c;
}

Scene generate_scene(const SceneSpec& spec, int feature_dim) {
  spec.validate();
  Scene scene;
  scene.spec = spec;
  const Vec3 h = spec.extents / 2.0;
  const double s = spec.spacing;
  auto face = [&](const Vec3& origin, const Vec3& u, const Vec3& v, const Vec3& n) {
    sample_face(scene.points, origin, u, v, n, s, spec.seed, feature_dim);
  };

  const Vec3 ex(spec.extents.x(), 0, 0);
  const Vec3 ey(0, spec.extents.y(), 0);
  const Vec3 ez(0, 0, spec.extents.z());
  switch (spec.kind) {
    case SceneKind::kPlane:
      // Single z=0 sheet, observable from above.
      face(Vec3(-h.x(), -h.y(), 0.0), ex, ey, Vec3::UnitZ());
      break;
    case SceneKind::kCorridor:
      // Floor, ceiling, and the two long walls; ends left open.
      face(Vec3(-h.x(), -h.y(), -h.z()), ex, ey, Vec3::UnitZ());
      face(Vec3(-h.x(), -h.y(), h.z()), ex, ey, -Vec3::UnitZ());
      face(Vec3(-h.x(), -h.y(), -h.z()), ex, ez, Vec3::UnitY());
      face(Vec3(-h.x(), h.y(), -h.z()), ex, ez, -Vec3::UnitY());
      break;
    case SceneKind::kBoxRoom:
      face(Vec3(-h.x(), -h.y(), -h.z()), ex, ey, Vec3::UnitZ());
      face(Vec3(-h.x(), -h.y(), h.z()), ex, ey, -Vec3::UnitZ());
      face(Vec3(-h.x(), -h.y(), -h.z()), ex, ez, Vec3::UnitY());
      face(Vec3(-h.x(), h.y(), -h.z()), ex, ez, -Vec3::UnitY());
      face(Vec3(-h.x(), -h.y(), -h.z()), ey, ez, Vec3::UnitX());
      face(Vec3(h.x(), -h.y(), -h.z()), ey, ez, -Vec3::UnitX());
      break;
  }
  return scene;
}

std::vector<Pose> generate_trajectory(const TrajectorySpec& spec) {
  spec.validate();
  std::vector<Pose> poses;
  poses.reserve(spec.n_frames);

  switch (spec.kind) {
    case TrajectoryKind::kStraightLine: {
      for (int t = 0; t < spec.n_frames; ++t) {
        poses.push_back(pose_at(Vec3(t * spec.speed, 0.0, 0.0), 0.0));
      }
      break;
    }
    case TrajectoryKind::kSquareLoop: {
      // The path circles the square `laps` times. With the revisit flag
      // the circuits close over the first ~80% of frames and the tail
      // retraces the first leg facing backwards, so the same region is
      // seen from opposing rays.
      const int n_loop = spec.revisit_with_reverse_heading
                             ? std::max(2, (spec.n_frames * 4) / 5)
                             : spec.n_frames;
      const double side = n_loop * spec.speed / (4.0 * spec.laps);
      const double perimeter = 4.0 * side;
      for (int t = 0; t < spec.n_frames; ++t) {
        const double s = t * spec.speed;
        Vec3 position;
        double yaw;
        square_point(s, side, position, yaw);
        if (spec.revisit_with_reverse_heading) {
          // Odd circuits and the closing tail face against the travel
          // direction, so every region is re-seen from opposing rays one
          // lap after it was mapped.
          const int lap_index = static_cast<int>(s / perimeter);
          if (t >= n_loop || lap_index % 2 == 1) {
            yaw += M_PI;
          }
        }
        poses.push_back(pose_at(position, yaw));
      }
      break;
    }
    case TrajectoryKind::kFigureEight: {
      // Gerono lemniscate scaled so the arclength roughly matches
      // n_frames * speed.
      const double amplitude = spec.n_frames * spec.speed / 6.0;
      for (int t = 0; t < spec.n_frames; ++t) {
        const double theta = 2.0 * M_PI * t / spec.n_frames;
        const Vec3 position(amplitude * std::sin(theta),
                            amplitude * std::sin(theta) * std::cos(theta), 0.0);
        const Vec3 tangent(std::cos(theta), std::cos(2.0 * theta), 0.0);
        poses.push_back(pose_at(position, yaw_of_direction(tangent)));
      }
      break;
    }
  }
  return poses;
}

std::vector<Pose> drift_odometry(const std::vector<Pose>& true_poses, const NoiseSpec& noise) {
  noise.validate();
  if (true_poses.empty()) return {};
  std::vector<Pose> est;
  est.reserve(true_poses.size());
  est.push_back(true_poses.front());

  SplitMix64 rng(mix_hash(noise.seed, 0x0d0a));
  const double bias_rad = noise.odometry_yaw_bias_deg * M_PI / 180.0;
  for (std::size_t t = 1; t < true_poses.size(); ++t) {
    const Pose rel = compose(inverse(true_poses[t - 1]), true_poses[t]);
    const Vec3 trans_noise(rng.next_gaussian() * noise.odometry_trans_sigma,
                           rng.next_gaussian() * noise.odometry_trans_sigma,
                           rng.next_gaussian() * noise.odometry_trans_sigma);
    const Pose perturbed(
        rel.rotation() * Eigen::Quaterniond(Eigen::AngleAxisd(bias_rad, Vec3::UnitZ())),
        rel.translation() + trans_noise);
    est.push_back(compose(est.back(), perturbed));
  }
  return est;
}

FrameObservation observe(const Scene& scene, FrameIndex frame_index, const Pose& true_pose,
                         const Pose& estimated_pose, const NoiseSpec& noise, double max_range,
                         double fov_deg, bool backface_cull) {
  noise.validate();
  if (!(max_range > 0.0) || !(fov_deg > 0.0 && fov_deg <= 360.0)) {
    throw std::invalid_argument("observe: bad max_range or fov");
  }
  FrameObservation frame;
  frame.frame_index = frame_index;
  frame.estimated_pose = estimated_pose;
  frame.true_pose = true_pose;

  SplitMix64 rng(mix_hash(noise.seed, 0xf00d ^ static_cast<std::uint64_t>(frame_index)));
  const Vec3 camera = true_pose.translation();
  const Vec3 forward = true_pose.rotation() * Vec3::UnitX();
  const double cos_half_fov = std::cos(fov_deg * M_PI / 360.0);
  const Pose true_inv = inverse(true_pose);
  const int dim = scene.points.empty() ? 0 : static_cast<int>(scene.points.front().descriptor.size());

  for (const SurfacePoint& sp : scene.points) {
    const Vec3 v = sp.position - camera;
    const double range = v.norm();
    if (range < 1e-9 || range > max_range) continue;
    if (forward.dot(v) < cos_half_fov * range) continue;
    if (backface_cull && sp.normal.vec().dot(-v) <= 0.0) continue;

    Vec3 p_cam = transform_point(true_inv, sp.position);
    if (noise.point_noise_sigma > 0.0) {
      p_cam += Vec3(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()) *
               noise.point_noise_sigma;
    }
    const Vec3 world = transform_point(estimated_pose, p_cam);
    const Vec3 offset = world - estimated_pose.translation();
    if (offset.norm() < 1e-12) continue;

    Eigen::VectorXf feature = sp.descriptor;
    if (noise.feature_noise_sigma > 0.0) {
      for (int i = 0; i < dim; ++i) {
        feature(i) += static_cast<float>(rng.next_gaussian() * noise.feature_noise_sigma);
      }
    }
    const float norm = feature.norm();
    if (norm > 1e-12f) feature /= norm;

    ScenePointer obs;
    obs.id = 0;
    obs.position = world;
    obs.ray = UnitDir(offset);
    obs.feature = std::move(feature);
    obs.frame_index = frame_index;
    frame.observations.push_back(std::move(obs));
  }
  return frame;
}

}  // namespace raymem
