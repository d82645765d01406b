#include "raymem/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace raymem {

namespace {

double lower_median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string format_cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}

/// Uniform-grid point index with exact expanding-ring nearest-neighbor
/// queries. Cell edge is derived from the cloud density; correctness does
/// not depend on the choice, only speed does.
class PointGrid {
 public:
  explicit PointGrid(const std::vector<Vec3>& points) : points_(points) {
    if (points.empty()) throw std::invalid_argument("PointGrid: empty cloud");
    Vec3 lo = points.front(), hi = points.front();
    for (const Vec3& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    // Density-derived cell size, floored by the largest extent so flat or
    // degenerate clouds cannot produce astronomically many rings.
    const Vec3 extent = hi - lo;
    const double volume = extent.prod();
    cell_ = std::max({std::cbrt(std::max(volume, 0.0) / static_cast<double>(points.size())),
                      extent.maxCoeff() / 256.0, 1e-9});
    for (std::size_t i = 0; i < points.size(); ++i) {
      cells_[key_of(points[i])].push_back(i);
    }
    lo_cell_ = coords_of(lo);
    hi_cell_ = coords_of(hi);
  }

  /// Index of the closest point (ties to the lowest index) and its
  /// distance.
  std::pair<std::size_t, double> nearest(const Vec3& q) const {
    std::size_t best = points_.size();
    double best_d2 = std::numeric_limits<double>::infinity();
    const std::array<std::int64_t, 3> c = coords_of(q);
    const std::int64_t max_ring = max_ring_from(c);
    for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
      // Points in ring m are at least (m-1)*cell away, so once the best
      // distance is within that bound no further ring can improve it.
      if (best < points_.size() &&
          std::sqrt(best_d2) <= static_cast<double>(ring - 1) * cell_) {
        break;
      }
      scan_ring(c, ring, [&](std::size_t idx) {
        const double d2 = (points_[idx] - q).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
          best_d2 = d2;
          best = idx;
        }
      });
    }
    return {best, std::sqrt(best_d2)};
  }

  /// Indices of the k nearest points to q, excluding exclude_idx (pass
  /// size() to keep all). Exact, deterministic order (distance, index).
  std::vector<std::size_t> k_nearest(const Vec3& q, int k, std::size_t exclude_idx) const {
    std::vector<std::pair<double, std::size_t>> found;
    const std::array<std::int64_t, 3> c = coords_of(q);
    const std::int64_t max_ring = max_ring_from(c);
    for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
      const bool have_k = static_cast<int>(found.size()) >= k;
      if (have_k) {
        std::nth_element(found.begin(), found.begin() + (k - 1), found.end());
        const double kth = std::sqrt(found[k - 1].first);
        if (kth <= static_cast<double>(ring - 1) * cell_) break;
      }
      scan_ring(c, ring, [&](std::size_t idx) {
        if (idx == exclude_idx) return;
        found.emplace_back((points_[idx] - q).squaredNorm(), idx);
      });
    }
    std::sort(found.begin(), found.end());
    if (static_cast<int>(found.size()) > k) found.resize(k);
    std::vector<std::size_t> out;
    out.reserve(found.size());
    for (const auto& [d2, idx] : found) out.push_back(idx);
    return out;
  }

 private:
  using Key = std::uint64_t;

  std::array<std::int64_t, 3> coords_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
            static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }

  static Key pack(std::int64_t x, std::int64_t y, std::int64_t z) {
    auto u = [](std::int64_t v) { return static_cast<std::uint64_t>(v + (1ll << 20)) & 0x1fffffull; };
    return (u(x) << 42) | (u(y) << 21) | u(z);
  }

  Key key_of(const Vec3& p) const {
    const auto c = coords_of(p);
    return pack(c[0], c[1], c[2]);
  }

  std::int64_t max_ring_from(const std::array<std::int64_t, 3>& c) const {
    std::int64_t m = 1;
    for (int a = 0; a < 3; ++a) {
      m = std::max(m, std::abs(c[a] - lo_cell_[a]));
      m = std::max(m, std::abs(c[a] - hi_cell_[a]));
    }
    return m;
  }

  template <typename F>
  void visit_cell(std::int64_t x, std::int64_t y, std::int64_t z, F&& f) const {
    auto it = cells_.find(pack(x, y, z));
    if (it == cells_.end()) return;
    for (std::size_t idx : it->second) f(idx);
  }

  template <typename F>
  void scan_ring(const std::array<std::int64_t, 3>& c, std::int64_t ring, F&& f) const {
    if (ring == 0) {
      visit_cell(c[0], c[1], c[2], f);
      return;
    }
    for (std::int64_t dx = -ring; dx <= ring; ++dx) {
      for (std::int64_t dy = -ring; dy <= ring; ++dy) {
        for (std::int64_t dz = -ring; dz <= ring; ++dz) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
          visit_cell(c[0] + dx, c[1] + dy, c[2] + dz, f);
        }
      }
    }
  }

  const std::vector<Vec3>& points_;
  double cell_ = 1.0;
  std::unordered_map<Key, std::vector<std::size_t>> cells_;
  std::array<std::int64_t, 3> lo_cell_{}, hi_cell_{};
};

DistanceStats nn_stats(const PointCloud& from, const PointCloud& to) {
  if (from.points.empty() || to.points.empty()) {
    throw std::invalid_argument("distance metric on empty cloud");
  }
  PointGrid grid(to.points);
  std::vector<double> dists;
  dists.reserve(from.points.size());
  for (const Vec3& p : from.points) {
    dists.push_back(grid.nearest(p).second);
  }
  return DistanceStats{mean_of(dists), lower_median(dists)};
}

/// Normal from the covariance of the k nearest neighbors (plus the point
/// itself). Returns nullopt when the neighborhood has no spatial extent.
std::optional<Vec3> estimate_normal(const PointGrid& grid, const std::vector<Vec3>& pts,
                                    std::size_t idx, int k) {
  const std::vector<std::size_t> nn = grid.k_nearest(pts[idx], k, idx);
  Vec3 centroid = pts[idx];
  for (std::size_t j : nn) centroid += pts[j];
  centroid /= static_cast<double>(nn.size() + 1);
  Mat3 cov = (pts[idx] - centroid) * (pts[idx] - centroid).transpose();
  for (std::size_t j : nn) {
    cov += (pts[j] - centroid) * (pts[j] - centroid).transpose();
  }
  if (cov.norm() < 1e-18) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  return eig.eigenvectors().col(0);
}

const Pose* find_frame(const Trajectory& t, FrameIndex f) {
  for (const TrajectoryEntry& e : t) {
    if (e.frame == f) return &e.pose;
  }
  return nullptr;
}

void check_strictly_increasing(const Trajectory& t) {
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i].frame <= t[i - 1].frame) {
      throw std::invalid_argument("trajectory frames not strictly increasing");
    }
  }
}

}  // namespace

Pose rigid_align_relaxed(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size() || src.empty()) {
    throw std::invalid_argument("rigid_align_relaxed: bad correspondence set");
  }
  const double n = static_cast<double>(src.size());
  Vec3 c_src = Vec3::Zero(), c_dst = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    c_src += src[i];
    c_dst += dst[i];
  }
  c_src /= n;
  c_dst /= n;
  Mat3 cross = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cross += (src[i] - c_src) * (dst[i] - c_dst).transpose();
  }
  Mat3 R = Mat3::Identity();
  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(0) > 1e-12) {
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    R = svd.matrixV() * d * svd.matrixU().transpose();
  }
  return Pose(Eigen::Quaterniond(R), c_dst - R * c_src);
}

double ate_rmse(const Trajectory& est, const Trajectory& gt) {
  check_strictly_increasing(est);
  check_strictly_increasing(gt);
  std::vector<Vec3> est_t, gt_t;
  for (const TrajectoryEntry& e : est) {
    if (const Pose* g = find_frame(gt, e.frame)) {
      est_t.push_back(e.pose.translation());
      gt_t.push_back(g->translation());
    }
  }
  if (est_t.size() < 2) throw std::invalid_argument("ate: fewer than 2 common frames");
  const Pose align = rigid_align_relaxed(est_t, gt_t);
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < est_t.size(); ++i) {
    sum_sq += (transform_point(align, est_t[i]) - gt_t[i]).squaredNorm();
  }
  return std::sqrt(sum_sq / static_cast<double>(est_t.size()));
}

RpeResult rpe(const Trajectory& est, const Trajectory& gt, FrameIndex delta) {
  if (delta < 1) throw std::invalid_argument("rpe: delta must be >= 1");
  check_strictly_increasing(est);
  check_strictly_increasing(gt);
  double sum_trans_sq = 0.0, sum_rot_sq = 0.0;
  int n = 0;
  for (const TrajectoryEntry& e : est) {
    const Pose* e_next = find_frame(est, e.frame + delta);
    const Pose* g_cur = find_frame(gt, e.frame);
    const Pose* g_next = find_frame(gt, e.frame + delta);
    if (!e_next || !g_cur || !g_next) continue;
    const Pose rel_est = compose(inverse(e.pose), *e_next);
    const Pose rel_gt = compose(inverse(*g_cur), *g_next);
    const Pose err = compose(inverse(rel_gt), rel_est);
    sum_trans_sq += err.translation().squaredNorm();
    const double ang = err.rotation_angle() * 180.0 / M_PI;
    sum_rot_sq += ang * ang;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("rpe: no valid frame pairs");
  return RpeResult{std::sqrt(sum_trans_sq / n), std::sqrt(sum_rot_sq / n)};
}

DistanceStats accuracy(const PointCloud& pred, const PointCloud& gt) {
  return nn_stats(pred, gt);
}

DistanceStats completeness(const PointCloud& pred, const PointCloud& gt) {
  return nn_stats(gt, pred);
}

NormalConsistencyResult normal_consistency(const PointCloud& pred, const PointCloud& gt, int k) {
  if (k < 1) throw std::invalid_argument("normal_consistency: k must be >= 1");
  if (pred.points.size() < static_cast<std::size_t>(k) + 1 ||
      gt.points.size() < static_cast<std::size_t>(k) + 1) {
    throw std::invalid_argument("normal_consistency: clouds need at least k+1 points");
  }
  PointGrid pred_grid(pred.points);
  PointGrid gt_grid(gt.points);

  NormalConsistencyResult result;
  std::vector<double> values;
  values.reserve(pred.points.size());
  for (std::size_t i = 0; i < pred.points.size(); ++i) {
    std::optional<Vec3> n_pred;
    if (pred.has_normals()) {
      n_pred = pred.normals[i].vec();
    } else {
      n_pred = estimate_normal(pred_grid, pred.points, i, k);
    }
    const auto [j, dist] = gt_grid.nearest(pred.points[i]);
    std::optional<Vec3> n_gt;
    if (gt.has_normals()) {
      n_gt = gt.normals[j].vec();
    } else {
      n_gt = estimate_normal(gt_grid, gt.points, j, k);
    }
    if (!n_pred || !n_gt) {
      result.n_degenerate++;
      continue;
    }
    values.push_back(std::min(1.0, std::abs(n_pred->dot(*n_gt))));
  }
  if (values.empty()) throw std::invalid_argument("normal_consistency: all neighborhoods degenerate");
  result.mean = mean_of(values);
  result.median = lower_median(values);
  return result;
}

std::string MetricsReport::csv_header() {
  return "ate_rmse,rpe_trans,rpe_rot,acc_mean,acc_median,comp_mean,comp_median,nc_mean,nc_median,"
         "memory_count";
}

std::string MetricsReport::csv_row() const {
  std::ostringstream os;
  os << format_cell(ate_rmse) << ',' << format_cell(rpe_trans) << ',' << format_cell(rpe_rot)
     << ',' << format_cell(acc_mean) << ',' << format_cell(acc_median) << ','
     << format_cell(comp_mean) << ',' << format_cell(comp_median) << ',' << format_cell(nc_mean)
     << ',' << format_cell(nc_median) << ',';
  if (memory_count) os << *memory_count;
  return os.str();
}

std::string MetricsReport::pretty() const {
  auto line = [](const char* name, const std::optional<double>& v, const char* unit) {
    char buf[96];
    if (v) {
      std::snprintf(buf, sizeof(buf), "  %-12s %.6f %s\n", name, *v, unit);
    } else {
      std::snprintf(buf, sizeof(buf), "  %-12s -\n", name);
    }
    return std::string(buf);
  };
  std::string out;
  out += line("ate_rmse", ate_rmse, "m");
  out += line("rpe_trans", rpe_trans, "m");
  out += line("rpe_rot", rpe_rot, "deg");
  out += line("acc_mean", acc_mean, "m");
  out += line("acc_median", acc_median, "m");
  out += line("comp_mean", comp_mean, "m");
  out += line("comp_median", comp_median, "m");
  out += line("nc_mean", nc_mean, "");
  out += line("nc_median", nc_median, "");
  char buf[64];
  if (memory_count) {
    std::snprintf(buf, sizeof(buf), "  %-12s %lld\n", "memory_count",
                  static_cast<long long>(*memory_count));
    out += buf;
  } else {
    out += "  memory_count -\n";
  }
  return out;
}

}  // namespace raymem
