#include "raymem/loop_closure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace raymem {

namespace {

bool non_collinear(const std::vector<Vec3>& pts) {
  if (pts.size() < 3) return false;
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  Mat3 scatter = Mat3::Zero();
  for (const Vec3& p : pts) {
    scatter += (p - centroid) * (p - centroid).transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  // Rank >= 2 of the scatter, i.e. the second-largest eigenvalue carries
  // real extent.
  return eig.eigenvalues()(1) > 1e-9 * std::max(1.0, eig.eigenvalues()(2));
}

Pose fit_pairs(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  return rigid_align(std::span<const Vec3>(src), std::span<const Vec3>(dst));
}

}  // namespace

AggregationResult aggregate_candidates(const std::vector<LoopHit>& hits, const MemoryStore& store,
                                       int min_pairs) {
  if (min_pairs < 3) throw std::invalid_argument("aggregate_candidates: min_pairs must be >= 3");

  // The retain-or-replace coin scatters pointer creation frames over the
  // last few sightings of a region, so exact (new, old) frame pairs almost
  // never collect min_pairs hits. Old frames within this window are close
  // enough in drift to share one constraint.
  constexpr FrameIndex kOldFrameWindow = 5;

  struct RawHit {
    FrameIndex old_frame;
    CorrespondencePair pair;
  };
  std::map<FrameIndex, std::vector<RawHit>> by_new_frame;
  for (const LoopHit& hit : hits) {
    if (!store.contains(hit.existing_id)) continue;  // replaced since flagging
    const ScenePointer& old_rec = store.get(hit.existing_id);
    by_new_frame[hit.new_pointer.frame_index].push_back(
        RawHit{old_rec.frame_index,
               CorrespondencePair{hit.new_pointer.position, hit.new_pointer.ray,
                                  hit.existing_id}});
  }

  AggregationResult out;
  for (auto& [new_frame, raw] : by_new_frame) {
    std::sort(raw.begin(), raw.end(),
              [](const RawHit& a, const RawHit& b) { return a.old_frame < b.old_frame; });
    std::size_t start = 0;
    while (start < raw.size()) {
      std::size_t end = start + 1;
      while (end < raw.size() && raw[end].old_frame - raw[end - 1].old_frame <= kOldFrameWindow) {
        ++end;
      }
      LoopCandidate cand;
      cand.new_frame = new_frame;
      cand.old_frame = raw[start + (end - start) / 2].old_frame;  // cluster median
      for (std::size_t i = start; i < end; ++i) {
        cand.pairs.push_back(raw[i].pair);
      }
      start = end;

      if (static_cast<int>(cand.pairs.size()) < min_pairs) {
        out.dropped_groups++;
        continue;
      }
      std::vector<Vec3> old_positions;
      old_positions.reserve(cand.pairs.size());
      for (const CorrespondencePair& p : cand.pairs) {
        old_positions.push_back(store.get(p.old_id).position);
      }
      if (!non_collinear(old_positions)) {
        out.dropped_groups++;
        continue;
      }
      out.candidates.push_back(std::move(cand));
    }
  }
  return out;
}

LoopEdgeEstimate estimate_loop_edge(const LoopCandidate& candidate, const MemoryStore& store) {
  if (candidate.pairs.empty()) {
    throw std::invalid_argument("estimate_loop_edge: empty candidate");
  }
  std::vector<Vec3> src, dst;
  src.reserve(candidate.pairs.size());
  dst.reserve(candidate.pairs.size());
  for (const CorrespondencePair& p : candidate.pairs) {
    src.push_back(p.new_position);
    dst.push_back(store.get(p.old_id).position);
  }

  Pose fit;
  try {
    fit = fit_pairs(src, dst);
  } catch (const std::invalid_argument&) {
    throw std::runtime_error("estimate_loop_edge: degenerate loop constraint");
  }

  // One inlier reselection pass: drop residuals above 3x the median, then
  // refit on what survives.
  std::vector<double> residuals(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    residuals[i] = (transform_point(fit, src[i]) - dst[i]).norm();
  }
  std::vector<double> sorted = residuals;
  std::nth_element(sorted.begin(), sorted.begin() + (sorted.size() - 1) / 2, sorted.end());
  const double median = sorted[(sorted.size() - 1) / 2];
  const double cutoff = 3.0 * median;

  std::vector<Vec3> src_in, dst_in;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (residuals[i] <= cutoff) {
      src_in.push_back(src[i]);
      dst_in.push_back(dst[i]);
    }
  }
  if (src_in.size() < src.size() && src_in.size() >= 3) {
    try {
      fit = fit_pairs(src_in, dst_in);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("estimate_loop_edge: degenerate loop constraint");
    }
  }
  return LoopEdgeEstimate{fit, static_cast<int>(src_in.size()),
                          static_cast<int>(candidate.pairs.size())};
}

Pose loop_edge_measurement(const Pose& correction, const Pose& old_node, const Pose& new_node) {
  return compose(inverse(old_node), compose(correction, new_node));
}

PoseGraph build_graph(const std::vector<Pose>& odometry, const std::vector<LoopEdgeSpec>& loops) {
  if (odometry.size() < 2) throw std::invalid_argument("build_graph: need at least 2 poses");
  PoseGraph g;
  g.nodes = odometry;
  const int n = static_cast<int>(odometry.size());
  for (int i = 0; i + 1 < n; ++i) {
    PoseGraphEdge e;
    e.i = i;
    e.j = i + 1;
    e.measured = compose(inverse(odometry[i]), odometry[i + 1]);
    e.information = Mat6::Identity();
    e.kind = EdgeKind::kOdometry;
    g.edges.push_back(e);
  }
  for (const LoopEdgeSpec& spec : loops) {
    if (spec.i < 0 || spec.i >= n || spec.j < 0 || spec.j >= n) {
      throw std::invalid_argument("build_graph: loop edge references out-of-range frame");
    }
    PoseGraphEdge e;
    e.i = spec.i;
    e.j = spec.j;
    e.measured = spec.measured;
    e.information = spec.info_scale * Mat6::Identity();
    e.kind = EdgeKind::kLoop;
    g.edges.push_back(e);
  }
  return g;
}

namespace {

Vec6 edge_residual(const PoseGraphEdge& e, const std::vector<Pose>& nodes) {
  const Pose err = compose(inverse(e.measured), compose(inverse(nodes[e.i]), nodes[e.j]));
  return twist_to_vec(log_map(err));
}

// Huber on the weighted residual norm x = sqrt(r^T Omega r):
// rho(x) = x^2 below delta, 2*delta*x - delta^2 above.
double robust_cost(double x2, const OptimizeOptions& opt) {
  if (!opt.robust) return x2;
  const double x = std::sqrt(x2);
  if (x <= opt.huber_delta) return x2;
  return 2.0 * opt.huber_delta * x - opt.huber_delta * opt.huber_delta;
}

double robust_weight(double x2, const OptimizeOptions& opt) {
  if (!opt.robust) return 1.0;
  const double x = std::sqrt(x2);
  if (x <= opt.huber_delta) return 1.0;
  return opt.huber_delta / x;
}

}  // namespace

double graph_cost(const PoseGraph& graph, const std::vector<Pose>& nodes,
                  const OptimizeOptions& options) {
  double cost = 0.0;
  for (const PoseGraphEdge& e : graph.edges) {
    const Vec6 r = edge_residual(e, nodes);
    cost += robust_cost(r.dot(e.information * r), options);
  }
  if (!std::isfinite(cost)) throw std::runtime_error("optimize: diverged");
  return cost;
}

OptimizeResult optimize(const PoseGraph& graph, const OptimizeOptions& options) {
  if (graph.nodes.size() < 2) throw std::invalid_argument("optimize: graph too small");
  for (const PoseGraphEdge& e : graph.edges) {
    const int n = static_cast<int>(graph.nodes.size());
    if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n || e.i == e.j) {
      throw std::invalid_argument("optimize: edge references invalid node");
    }
  }

  std::vector<Pose> nodes = graph.nodes;
  const int n_free = static_cast<int>(nodes.size()) - 1;  // node 0 is the gauge
  const int dim = 6 * n_free;

  OptimizeResult result;
  result.initial_cost = graph_cost(graph, nodes, options);
  double cost = result.initial_cost;
  int iterations_run = 0;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (cost < options.tolerance) break;
    iterations_run = iter + 1;

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    for (const PoseGraphEdge& e : graph.edges) {
      const Vec6 r = edge_residual(e, nodes);
      const double w = robust_weight(r.dot(e.information * r), options);
      const Mat6 jr_inv = se3_right_jacobian_inverse(r);
      const Mat6 jac_j = jr_inv;
      const Mat6 jac_i = -jr_inv * adjoint(compose(inverse(nodes[e.j]), nodes[e.i]));
      const Mat6 w_info = w * e.information;

      const int bi = (e.i - 1) * 6;
      const int bj = (e.j - 1) * 6;
      if (e.i > 0) {
        H.block<6, 6>(bi, bi) += jac_i.transpose() * w_info * jac_i;
        b.segment<6>(bi) += jac_i.transpose() * w_info * r;
      }
      if (e.j > 0) {
        H.block<6, 6>(bj, bj) += jac_j.transpose() * w_info * jac_j;
        b.segment<6>(bj) += jac_j.transpose() * w_info * r;
      }
      if (e.i > 0 && e.j > 0) {
        H.block<6, 6>(bi, bj) += jac_i.transpose() * w_info * jac_j;
        H.block<6, 6>(bj, bi) += jac_j.transpose() * w_info * jac_i;
      }
    }

    // Tiny ridge keeps the system solvable when a node has weak coverage.
    H.diagonal().array() += 1e-12;
    Eigen::VectorXd step = H.ldlt().solve(-b);
    if (!step.allFinite()) throw std::runtime_error("optimize: diverged");

    // Backtracking: accept only non-increasing cost.
    double scale = 1.0;
    bool accepted = false;
    bool converged = false;
    std::vector<Pose> trial = nodes;
    for (int attempt = 0; attempt < 12; ++attempt) {
      for (int k = 0; k < n_free; ++k) {
        trial[k + 1] =
            compose(nodes[k + 1], exp_map(vec_to_twist(scale * step.segment<6>(6 * k))));
      }
      const double trial_cost = graph_cost(graph, trial, options);
      if (trial_cost <= cost) {
        nodes = trial;
        accepted = true;
        converged = (cost - trial_cost) < options.tolerance;
        cost = trial_cost;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted || converged) break;
  }

  result.poses = nodes;
  result.final_cost = cost;
  result.iterations = iterations_run;
  result.deltas.reserve(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    result.deltas.push_back(compose(nodes[k], inverse(graph.nodes[k])));
  }
  return result;
}

InfoScore info_score(const MemoryStore& store, const std::set<PointerId>& region, int k) {
  if (k < 1) throw std::invalid_argument("info_score: k must be >= 1");
  std::vector<const ScenePointer*> members;
  members.reserve(region.size());
  for (PointerId id : region) {
    members.push_back(&store.get(id));
  }

  InfoScore scores;
  for (const ScenePointer* self : members) {
    std::vector<std::pair<double, const ScenePointer*>> others;
    others.reserve(members.size());
    for (const ScenePointer* other : members) {
      if (other == self) continue;
      others.emplace_back((other->position - self->position).norm(), other);
    }
    std::sort(others.begin(), others.end(),
              [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first < b.first : a.second->id < b.second->id;
              });
    const std::size_t use = std::min<std::size_t>(k, others.size());
    if (use == 0) {
      scores[self->id] = 0.0;
      continue;
    }
    Vec3 mean_ray = Vec3::Zero();
    for (std::size_t i = 0; i < use; ++i) mean_ray += others[i].second->ray.vec();
    mean_ray /= static_cast<double>(use);
    Mat3 scatter = Mat3::Zero();
    for (std::size_t i = 0; i < use; ++i) {
      const Vec3 d = others[i].second->ray.vec() - mean_ray;
      scatter += d * d.transpose();
    }
    scatter /= static_cast<double>(use);
    Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
    scores[self->id] = eig.eigenvalues()(2) + eig.eigenvalues()(1);
  }
  return scores;
}

SparsifyReport sparsify(MemoryStore& store, const std::set<PointerId>& region,
                        double keep_fraction, int k) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw std::invalid_argument("sparsify: keep_fraction must be in (0, 1]");
  }
  SparsifyReport report;
  report.region_size = region.size();
  if (region.empty()) return report;

  const InfoScore scores = info_score(store, region, k);
  std::vector<std::pair<double, PointerId>> ranked;
  ranked.reserve(scores.size());
  for (const auto& [id, score] : scores) ranked.emplace_back(score, id);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });

  const std::size_t keep = static_cast<std::size_t>(
      std::ceil(keep_fraction * static_cast<double>(region.size())));
  report.kept = std::min(keep, ranked.size());
  for (std::size_t i = report.kept; i < ranked.size(); ++i) {
    report.removed.push_back(ranked[i].second);
  }
  store.remove(report.removed);
  return report;
}

void dump_g2o(const PoseGraph& graph, std::ostream& os) {
  char buf[512];
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const Pose& p = graph.nodes[i];
    const Eigen::Quaterniond& q = p.rotation();
    std::snprintf(buf, sizeof(buf), "VERTEX_SE3:QUAT %zu %.12g %.12g %.12g %.12g %.12g %.12g %.12g\n",
                  i, p.translation().x(), p.translation().y(), p.translation().z(), q.x(), q.y(),
                  q.z(), q.w());
    os << buf;
  }
  for (const PoseGraphEdge& e : graph.edges) {
    const Eigen::Quaterniond& q = e.measured.rotation();
    std::snprintf(buf, sizeof(buf), "EDGE_SE3:QUAT %d %d %.12g %.12g %.12g %.12g %.12g %.12g %.12g",
                  e.i, e.j, e.measured.translation().x(), e.measured.translation().y(),
                  e.measured.translation().z(), q.x(), q.y(), q.z(), q.w());
    os << buf;
    for (int r = 0; r < 6; ++r) {
      for (int c = r; c < 6; ++c) {
        std::snprintf(buf, sizeof(buf), " %.12g", e.information(r, c));
        os << buf;
      }
    }
    os << '\n';
  }
}

}  // namespace raymem
