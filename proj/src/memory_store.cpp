#include "raymem/memory_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace raymem {

void MemoryConfig::validate() const {
  if (!(radius_r > 0.0)) throw std::invalid_argument("MemoryConfig: radius_r must be > 0");
  if (lambda_pos < 0.0 || lambda_ang < 0.0 || lambda_feat < 0.0) {
    throw std::invalid_argument("MemoryConfig: lambda weights must be >= 0");
  }
  if (!(lambda_pos + lambda_ang > 0.0)) {
    throw std::invalid_argument("MemoryConfig: lambda_pos + lambda_ang must be > 0");
  }
  if (!(eps_pos > 0.0)) throw std::invalid_argument("MemoryConfig: eps_pos must be > 0");
  if (eps_pos > radius_r) {
    throw std::invalid_argument(
        "MemoryConfig: eps_pos must be <= radius_r (a loop candidate must also be a spatial "
        "neighbor)");
  }
  if (!(eps_ang > 0.0 && eps_ang < 2.0)) {
    throw std::invalid_argument("MemoryConfig: eps_ang must be in (0, 2)");
  }
  if (delta_t_frames <= 0) {
    throw std::invalid_argument("MemoryConfig: delta_t_frames must be positive");
  }
  if (feature_dim <= 0) throw std::invalid_argument("MemoryConfig: feature_dim must be positive");
}

double joint_distance(const ScenePointer& a, const ScenePointer& b, const MemoryConfig& cfg) {
  const double d_pos = (a.position - b.position).norm();
  const double d_ang = 1.0 - a.ray.dot(b.ray);
  double d = cfg.lambda_pos * d_pos + cfg.lambda_ang * d_ang;
  if (cfg.lambda_feat > 0.0) {
    if (a.feature.size() != b.feature.size()) {
      throw std::invalid_argument("joint_distance: feature dimension mismatch");
    }
    const double na = a.feature.norm();
    const double nb = b.feature.norm();
    const double cos_f =
        (na > 1e-12 && nb > 1e-12) ? a.feature.dot(b.feature) / (na * nb) : 0.0;
    d += cfg.lambda_feat * (1.0 - cos_f);
  }
  return d;
}

std::size_t MemoryStore::CellHash::operator()(const Cell& c) const {
  std::uint64_t h = mix_hash(0x8f1bbcdcull, static_cast<std::uint64_t>(c.x));
  h = mix_hash(h, static_cast<std::uint64_t>(c.y));
  h = mix_hash(h, static_cast<std::uint64_t>(c.z));
  return static_cast<std::size_t>(h);
}

MemoryStore::MemoryStore(const MemoryConfig& cfg) : cfg_(cfg), rng_(cfg.rng_seed) {
  cfg_.validate();
}

const ScenePointer& MemoryStore::get(PointerId id) const {
  auto it = records_.find(id);
  if (it == records_.end()) throw std::out_of_range("MemoryStore: stale id");
  return it->second;
}

MemoryStore::Cell MemoryStore::cell_of(const Vec3& p) const {
  return Cell{static_cast<std::int64_t>(std::floor(p.x() / cfg_.radius_r)),
              static_cast<std::int64_t>(std::floor(p.y() / cfg_.radius_r)),
              static_cast<std::int64_t>(std::floor(p.z() / cfg_.radius_r))};
}

void MemoryStore::grid_insert(PointerId id, const Vec3& p) { grid_[cell_of(p)].push_back(id); }

void MemoryStore::grid_erase(PointerId id, const Vec3& p) {
  const Cell c = cell_of(p);
  auto it = grid_.find(c);
  if (it == grid_.end()) return;
  auto& ids = it->second;
  ids.erase(std::remove(ids.begin(), ids.end(), id), ids.end());
  if (ids.empty()) grid_.erase(it);
}

std::vector<PointerId> MemoryStore::radius_query(const Vec3& x, double r) const {
  if (!(r > 0.0)) throw std::invalid_argument("radius_query: r must be > 0");
  std::vector<PointerId> out;
  if (records_.empty()) return out;
  const Cell lo = cell_of(x - Vec3::Constant(r));
  const Cell hi = cell_of(x + Vec3::Constant(r));
  const double r2 = r * r;
  for (std::int64_t cx = lo.x; cx <= hi.x; ++cx) {
    for (std::int64_t cy = lo.y; cy <= hi.y; ++cy) {
      for (std::int64_t cz = lo.z; cz <= hi.z; ++cz) {
        auto it = grid_.find(Cell{cx, cy, cz});
        if (it == grid_.end()) continue;
        for (PointerId id : it->second) {
          if ((records_.at(id).position - x).squaredNorm() < r2) {
            out.push_back(id);
          }
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Classification MemoryStore::classify(const ScenePointer& incoming) const {
  check_feature(incoming);
  const std::vector<PointerId> neighbors = radius_query(incoming.position, cfg_.radius_r);
  if (neighbors.empty()) {
    return Classification{ObservationKind::kNovelGeometry, std::nullopt, 0.0};
  }
  PointerId best_id = neighbors.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (PointerId id : neighbors) {  // ascending ids, so ties keep the lower id
    const double d = joint_distance(incoming, records_.at(id), cfg_);
    if (d < best_d) {
      best_d = d;
      best_id = id;
    }
  }
  const ScenePointer& nearest = records_.at(best_id);
  const bool spatial = (incoming.position - nearest.position).norm() < cfg_.eps_pos;
  const bool angular = (1.0 - incoming.ray.dot(nearest.ray)) > cfg_.eps_ang;
  const bool temporal = std::llabs(incoming.frame_index - nearest.frame_index) > cfg_.delta_t_frames;
  const ObservationKind kind = (spatial && angular && temporal)
                                   ? ObservationKind::kLoopRevisit
                                   : ObservationKind::kLocalRedundancy;
  return Classification{kind, best_id, best_d};
}

ConflictOutcome MemoryStore::retain_or_replace(const ScenePointer& incoming,
                                               PointerId existing_id) {
  auto it = records_.find(existing_id);
  if (it == records_.end()) throw std::out_of_range("retain_or_replace: stale id");

  bool take_new = false;
  switch (cfg_.policy) {
    case UpdatePolicy::kRetainOrReplace:
      take_new = rng_.next_bool();  // one draw per conflict, in processing order
      break;
    case UpdatePolicy::kKeepExisting:
      take_new = false;
      break;
    case UpdatePolicy::kReplaceExisting:
      take_new = true;
      break;
    case UpdatePolicy::kAppendOnly:
      throw std::logic_error("retain_or_replace: append-only policy never conflicts");
  }
  if (!take_new) return ConflictOutcome::kKeptExisting;

  grid_erase(existing_id, it->second.position);
  records_.erase(it);
  insert_record(incoming);
  return ConflictOutcome::kReplacedWithNew;
}

PointerId MemoryStore::insert_record(ScenePointer rec) {
  rec.id = next_id_++;
  const PointerId id = rec.id;
  grid_insert(id, rec.position);
  records_.emplace(id, std::move(rec));
  return id;
}

void MemoryStore::check_feature(const ScenePointer& rec) const {
  if (rec.feature.size() != cfg_.feature_dim) {
    throw std::invalid_argument("ScenePointer: feature length != config.feature_dim");
  }
}

UpdateReport MemoryStore::insert_frame(const std::vector<ScenePointer>& observations) {
  const FrameIndex frame = frame_counter_ + 1;
  UpdateReport report;
  report.frame_index = frame;
  report.n_input = static_cast<int>(observations.size());

  for (const ScenePointer& obs : observations) {
    if (obs.frame_index != frame) {
      throw std::invalid_argument("insert_frame: non-monotone frame");
    }
    check_feature(obs);
    if (cfg_.policy == UpdatePolicy::kAppendOnly) {
      insert_record(obs);
      report.n_added++;
      continue;
    }
    const Classification cls = classify(obs);
    switch (cls.kind) {
      case ObservationKind::kNovelGeometry:
        insert_record(obs);
        report.n_added++;
        break;
      case ObservationKind::kLocalRedundancy:
        if (retain_or_replace(obs, *cls.nearest_id) == ConflictOutcome::kReplacedWithNew) {
          report.n_added++;
          report.n_replaced++;
        } else {
          report.n_discarded_new++;
        }
        break;
      case ObservationKind::kLoopRevisit: {
        // Keep both viewpoints; the pair feeds loop-constraint estimation.
        const PointerId new_id = insert_record(obs);
        report.n_added++;
        report.n_loop_flagged++;
        report.loop_hits.push_back(LoopHit{records_.at(new_id), *cls.nearest_id});
        break;
      }
    }
  }
  frame_counter_ = frame;
  report.memory_size_after = records_.size();
  return report;
}

void MemoryStore::reanchor(const std::map<FrameIndex, Pose>& corrections) {
  grid_.clear();
  for (auto& [id, rec] : records_) {
    auto it = corrections.find(rec.frame_index);
    if (it != corrections.end()) {
      rec.position = transform_point(it->second, rec.position);
      rec.ray = rotate_dir(it->second, rec.ray);
    }
    grid_insert(id, rec.position);
  }
}

void MemoryStore::remove(const std::vector<PointerId>& ids) {
  for (PointerId id : ids) {
    auto it = records_.find(id);
    if (it == records_.end()) throw std::out_of_range("MemoryStore: stale id");
    grid_erase(id, it->second.position);
    records_.erase(it);
  }
}

MemoryStats MemoryStore::stats() const {
  MemoryStats s;
  s.count = records_.size();
  for (const auto& [id, rec] : records_) {
    s.per_frame[rec.frame_index]++;
  }
  s.occupied_cells = grid_.size();
  for (const auto& [cell, ids] : grid_) {
    s.max_cell_load = std::max(s.max_cell_load, ids.size());
  }
  return s;
}

std::vector<const ScenePointer*> MemoryStore::ordered_records() const {
  std::vector<const ScenePointer*> out;
  out.reserve(records_.size());
  for (const auto& [id, rec] : records_) out.push_back(&rec);
  std::sort(out.begin(), out.end(),
            [](const ScenePointer* a, const ScenePointer* b) { return a->id < b->id; });
  return out;
}

void MemoryStore::restore(const std::vector<ScenePointer>& records) {
  records_.clear();
  grid_.clear();
  next_id_ = 0;
  frame_counter_ = -1;
  for (const ScenePointer& rec : records) {
    check_feature(rec);
    frame_counter_ = std::max(frame_counter_, rec.frame_index);
    insert_record(rec);
  }
}

}  // namespace raymem
