#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "raymem/loop_closure.hpp"
#include "raymem/rng.hpp"
#include "raymem/simulator.hpp"

#include <cmath>
#include <sstream>

using namespace raymem;

namespace {

MemoryConfig wide_config() {
  MemoryConfig cfg;
  cfg.radius_r = 10.0;
  cfg.eps_pos = 10.0;
  cfg.feature_dim = 4;
  return cfg;
}

ScenePointer make_obs(const Vec3& position, FrameIndex frame, int dim = 4) {
  ScenePointer p;
  p.position = position;
  p.ray = UnitDir(Vec3(0, 0, 1));
  Eigen::VectorXf f = Eigen::VectorXf::Zero(dim);
  f(0) = 1.0f;
  p.feature = f;
  p.frame_index = frame;
  return p;
}

double pose_distance(const Pose& a, const Pose& b) {
  const Pose d = compose(inverse(a), b);
  return d.translation().norm() + d.rotation_angle();
}

/// Store with `n` old pointers at pseudo-random positions plus the hit
/// list pairing drifted observations against them.
struct LoopFixture {
  MemoryStore store;
  std::vector<LoopHit> hits;
};

LoopFixture make_fixture(int n, const Pose& drift, std::uint64_t seed,
                         FrameIndex old_frame = 0, FrameIndex new_frame = 100) {
  LoopFixture fx{MemoryStore(wide_config()), {}};
  SplitMix64 rng(seed);
  std::vector<ScenePointer> frame;
  for (int i = 0; i < n; ++i) {
    frame.push_back(make_obs(
        Vec3(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()), old_frame));
  }
  // Spread them wide enough that nothing conflicts on insert.
  for (int i = 0; i < n; ++i) frame[i].position += Vec3(i * 25.0, 0, 0);
  fx.store.insert_frame(frame);

  for (const ScenePointer* rec : fx.store.ordered_records()) {
    LoopHit hit;
    hit.existing_id = rec->id;
    hit.new_pointer = *rec;
    hit.new_pointer.frame_index = new_frame;
    // The drifted system would have reconstructed the point at drift * x.
    hit.new_pointer.position = transform_point(drift, rec->position);
    fx.hits.push_back(hit);
  }
  return fx;
}

}  // namespace

TEST_CASE("aggregate_candidates on empty input") {
  MemoryStore store(wide_config());
  const AggregationResult r = aggregate_candidates({}, store, 5);
  CHECK(r.candidates.empty());
  CHECK(r.dropped_groups == 0);
}

TEST_CASE("aggregate_candidates groups hits by frame pair") {
  LoopFixture fx = make_fixture(10, Pose(), 3);
  const AggregationResult r = aggregate_candidates(fx.hits, fx.store, 5);
  REQUIRE(r.candidates.size() == 1);
  CHECK(r.candidates[0].new_frame == 100);
  CHECK(r.candidates[0].old_frame == 0);
  CHECK(r.candidates[0].pairs.size() == 10);
}

TEST_CASE("aggregate_candidates drops small and collinear groups") {
  LoopFixture fx = make_fixture(4, Pose(), 4);
  SUBCASE("below min_pairs") {
    const AggregationResult r = aggregate_candidates(fx.hits, fx.store, 5);
    CHECK(r.candidates.empty());
    CHECK(r.dropped_groups == 1);
  }
  SUBCASE("stale ids are skipped") {
    fx.store.remove({fx.hits[0].existing_id, fx.hits[1].existing_id});
    const AggregationResult r = aggregate_candidates(fx.hits, fx.store, 3);
    CHECK(r.candidates.empty());  // only 2 usable pairs remain
    CHECK(r.dropped_groups == 1);
  }

  SUBCASE("collinear old positions") {
    MemoryStore store(wide_config());
    std::vector<ScenePointer> frame;
    for (int i = 0; i < 5; ++i) frame.push_back(make_obs(Vec3(i * 25.0, 0, 0), 0));
    store.insert_frame(frame);
    std::vector<LoopHit> hits;
    for (const ScenePointer* rec : store.ordered_records()) {
      hits.push_back(LoopHit{*rec, rec->id});
      hits.back().new_pointer.frame_index = 50;
    }
    const AggregationResult r = aggregate_candidates(hits, store, 3);
    CHECK(r.candidates.empty());
    CHECK(r.dropped_groups == 1);
  }
}

TEST_CASE("estimate_loop_edge is identity when already consistent") {
  LoopFixture fx = make_fixture(8, Pose(), 5);
  const AggregationResult agg = aggregate_candidates(fx.hits, fx.store, 5);
  REQUIRE(agg.candidates.size() == 1);
  const LoopEdgeEstimate est = estimate_loop_edge(agg.candidates[0], fx.store);
  CHECK(pose_distance(est.correction, Pose()) < 1e-6);
  CHECK(est.inlier_count == 8);
}

TEST_CASE("estimate_loop_edge recovers a synthetic drift exactly") {
  const Pose drift(Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Vec3(0.2, 1, 0.1).normalized())),
                   Vec3(0.5, -0.2, 0.7));
  LoopFixture fx = make_fixture(8, drift, 6);
  const AggregationResult agg = aggregate_candidates(fx.hits, fx.store, 5);
  REQUIRE(agg.candidates.size() == 1);
  const LoopEdgeEstimate est = estimate_loop_edge(agg.candidates[0], fx.store);
  // The correction undoes the drift: correction ∘ drift = identity.
  CHECK(pose_distance(compose(est.correction, drift), Pose()) < 1e-6);
}

TEST_CASE("estimate_loop_edge survives gross outliers via the inlier pass") {
  const Pose drift(Eigen::Quaterniond(Eigen::AngleAxisd(0.2, Vec3::UnitZ())), Vec3(0.4, 0.1, 0));
  LoopFixture fx = make_fixture(50, drift, 4242);
  // 20% of the correspondences knocked 1 m off.
  SplitMix64 rng(777);
  for (int i = 0; i < 10; ++i) {
    const std::size_t idx = rng.next_below(fx.hits.size());
    fx.hits[idx].new_pointer.position += Vec3(1.0, 0, 0);
  }
  const AggregationResult agg = aggregate_candidates(fx.hits, fx.store, 5);
  REQUIRE(agg.candidates.size() == 1);
  const LoopEdgeEstimate est = estimate_loop_edge(agg.candidates[0], fx.store);
  const Pose err = compose(est.correction, drift);
  CHECK(err.translation().norm() < 1e-3);
  CHECK(err.rotation_angle() < 1e-3);
  CHECK(est.inlier_count <= 50 - 10 + 2);  // outliers rejected, allow boundary slack
}

TEST_CASE("build_graph shapes") {
  SUBCASE("two poses, no loops") {
    const PoseGraph g = build_graph({Pose(), Pose::from_translation(Vec3(1, 0, 0))}, {});
    CHECK(g.nodes.size() == 2);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].kind == EdgeKind::kOdometry);
    CHECK(pose_distance(g.edges[0].measured, Pose::from_translation(Vec3(1, 0, 0))) < 1e-12);
  }
  SUBCASE("square loop with one loop edge has T edges") {
    TrajectorySpec spec;
    spec.kind = TrajectoryKind::kSquareLoop;
    spec.n_frames = 40;
    spec.speed = 0.1;
    const std::vector<Pose> poses = generate_trajectory(spec);
    const PoseGraph g = build_graph(poses, {LoopEdgeSpec{0, 39, Pose(), 10.0}});
    CHECK(g.edges.size() == poses.size());  // T-1 odometry + 1 loop
  }
  SUBCASE("out-of-range loop edge throws") {
    CHECK_THROWS_AS(build_graph({Pose(), Pose()}, {LoopEdgeSpec{0, 7, Pose(), 1.0}}),
                    std::invalid_argument);
  }
}

TEST_CASE("initial graph cost equals the loop residual only") {
  // Odometry edges are consistent by construction, so all initial cost
  // comes from the loop edge.
  std::vector<Pose> poses = {Pose(), Pose::from_translation(Vec3(1, 0, 0)),
                             Pose::from_translation(Vec3(2, 0, 0))};
  OptimizeOptions opt;
  opt.robust = false;
  const PoseGraph consistent = build_graph(poses, {});
  CHECK(graph_cost(consistent, consistent.nodes, opt) == doctest::Approx(0.0).epsilon(1e-15));

  const Pose measured = Pose::from_translation(Vec3(1.9, 0, 0));  // says node2 is at 1.9
  const PoseGraph g = build_graph(poses, {LoopEdgeSpec{0, 2, measured, 1.0}});
  const Vec6 residual = twist_to_vec(log_map(
      compose(inverse(measured), compose(inverse(poses[0]), poses[2]))));
  CHECK(graph_cost(g, g.nodes, opt) == doctest::Approx(residual.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("optimize leaves a consistent graph untouched") {
  TrajectorySpec spec;
  spec.kind = TrajectoryKind::kSquareLoop;
  spec.n_frames = 30;
  spec.speed = 0.1;
  const std::vector<Pose> poses = generate_trajectory(spec);
  const Pose true_rel = compose(inverse(poses[2]), poses[27]);
  const PoseGraph g = build_graph(poses, {LoopEdgeSpec{2, 27, true_rel, 10.0}});

  const OptimizeResult r = optimize(g);
  CHECK(r.initial_cost < 1e-12);
  CHECK(r.final_cost < 1e-12);
  CHECK(r.iterations == 0);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    CHECK(pose_distance(r.poses[i], poses[i]) < 1e-12);
    CHECK(pose_distance(r.deltas[i], Pose()) < 1e-12);
  }
}

TEST_CASE("optimize solves the two-node conflict to the least-squares midpoint") {
  std::vector<Pose> poses = {Pose(), Pose::from_translation(Vec3(1, 0, 0))};
  const PoseGraph g =
      build_graph(poses, {LoopEdgeSpec{0, 1, Pose::from_translation(Vec3(0.8, 0, 0)), 1.0}});
  OptimizeOptions opt;
  opt.robust = false;
  const OptimizeResult r = optimize(g, opt);
  CHECK((r.poses[1].translation() - Vec3(0.9, 0, 0)).norm() < 1e-8);
  CHECK(r.poses[1].rotation_angle() < 1e-9);
  CHECK(r.final_cost <= r.initial_cost);
}

TEST_CASE("edge residuals are gauge invariant") {
  SplitMix64 rng(21);
  std::vector<Pose> poses;
  Pose current;
  poses.push_back(current);
  for (int i = 0; i < 10; ++i) {
    current = compose(current, Pose(Eigen::Quaterniond(Eigen::AngleAxisd(
                                        0.2 * rng.next_gaussian(), Vec3::UnitZ())),
                                    Vec3(0.1, 0.01 * rng.next_gaussian(), 0)));
    poses.push_back(current);
  }
  const PoseGraph g =
      build_graph(poses, {LoopEdgeSpec{0, 10, Pose::from_translation(Vec3(0.5, 0, 0)), 2.0}});
  OptimizeOptions opt;
  const double base_cost = graph_cost(g, g.nodes, opt);

  const Pose gauge(Eigen::Quaterniond(Eigen::AngleAxisd(1.3, Vec3(1, 1, 1).normalized())),
                   Vec3(4, -2, 7));
  PoseGraph moved = g;
  for (Pose& p : moved.nodes) p = compose(gauge, p);
  CHECK(graph_cost(moved, moved.nodes, opt) == doctest::Approx(base_cost).epsilon(1e-9));
}

TEST_CASE("optimize closes a drifted square loop") {
  TrajectorySpec spec;
  spec.kind = TrajectoryKind::kSquareLoop;
  spec.n_frames = 100;
  spec.speed = 0.08;
  const std::vector<Pose> truth = generate_trajectory(spec);

  NoiseSpec noise;
  noise.odometry_yaw_bias_deg = 1.0;
  noise.seed = 9;
  const std::vector<Pose> drifted = drift_odometry(truth, noise);

  // Loop edge anchored on ground truth between the ends of the loop.
  const Pose true_rel = compose(inverse(truth[0]), truth[99]);
  const PoseGraph g = build_graph(drifted, {LoopEdgeSpec{0, 99, true_rel, 10.0}});

  OptimizeOptions opt;
  const OptimizeResult r = optimize(g, opt);
  auto loop_residual = [&](const std::vector<Pose>& nodes) {
    return twist_to_vec(
               log_map(compose(inverse(true_rel), compose(inverse(nodes[0]), nodes[99]))))
        .norm();
  };
  CHECK(loop_residual(r.poses) < 0.01 * loop_residual(g.nodes));
  CHECK(r.final_cost <= r.initial_cost);
}

TEST_CASE("optimize rejects invalid graphs") {
  CHECK_THROWS_AS(optimize(PoseGraph{{Pose()}, {}}), std::invalid_argument);
  PoseGraph bad;
  bad.nodes = {Pose(), Pose()};
  bad.edges.push_back(PoseGraphEdge{0, 5, Pose(), Mat6::Identity(), EdgeKind::kOdometry});
  CHECK_THROWS_AS(optimize(bad), std::invalid_argument);
}

TEST_CASE("info_score is zero for identical neighbor rays") {
  MemoryStore store(wide_config());
  std::vector<ScenePointer> frame;
  for (int i = 0; i < 6; ++i) frame.push_back(make_obs(Vec3(i * 25.0, 0, 0), 0));
  store.insert_frame(frame);
  std::set<PointerId> region;
  for (const ScenePointer* rec : store.ordered_records()) region.insert(rec->id);
  for (const auto& [id, score] : info_score(store, region, 3)) {
    CHECK(score == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("info_score of a 50/50 orthogonal split is one half") {
  // Pointer 0's two neighbors carry rays ex and ey; the normalized
  // scatter of {ex, ey} has eigenvalues 0.5 and 0.
  MemoryConfig cfg = wide_config();
  MemoryStore store(cfg);
  std::vector<ScenePointer> frame;
  frame.push_back(make_obs(Vec3(0, 0, 0), 0));
  ScenePointer nx = make_obs(Vec3(25, 0, 0), 0);
  nx.ray = UnitDir(Vec3(1, 0, 0));
  ScenePointer ny = make_obs(Vec3(0, 25, 0), 0);
  ny.ray = UnitDir(Vec3(0, 1, 0));
  frame.push_back(nx);
  frame.push_back(ny);
  store.insert_frame(frame);

  const InfoScore scores = info_score(store, {0, 1, 2}, 2);
  CHECK(scores.at(0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("sparsify keeps the requested fraction") {
  MemoryStore store(wide_config());
  std::vector<ScenePointer> frame;
  SplitMix64 rng(61);
  for (int i = 0; i < 100; ++i) {
    ScenePointer p = make_obs(Vec3(i * 25.0, 0, 0), 0);
    p.ray = UnitDir(Vec3(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()));
    frame.push_back(p);
  }
  store.insert_frame(frame);
  std::set<PointerId> region;
  for (const ScenePointer* rec : store.ordered_records()) region.insert(rec->id);

  SUBCASE("keep everything") {
    const SparsifyReport r = sparsify(store, region, 1.0, 5);
    CHECK(r.removed.empty());
    CHECK(store.size() == 100);
  }
  SUBCASE("keep half") {
    const SparsifyReport r = sparsify(store, region, 0.5, 5);
    CHECK(r.kept == 50);
    CHECK(r.removed.size() == 50);
    CHECK(store.size() == 50);
  }
  SUBCASE("ceil count law") {
    const SparsifyReport r = sparsify(store, region, 0.333, 5);
    CHECK(r.kept == 34);  // ceil(33.3)
    CHECK(store.size() == 34);
  }
}

TEST_CASE("g2o dump emits one line per node and edge") {
  std::vector<Pose> poses = {Pose(), Pose::from_translation(Vec3(1, 0, 0)),
                             Pose::from_translation(Vec3(2, 0, 0))};
  const PoseGraph g = build_graph(poses, {LoopEdgeSpec{0, 2, Pose(), 10.0}});
  std::ostringstream os;
  dump_g2o(g, os);
  std::istringstream is(os.str());
  std::string line;
  int vertices = 0, edges = 0;
  while (std::getline(is, line)) {
    if (line.starts_with("VERTEX_SE3:QUAT ")) vertices++;
    if (line.starts_with("EDGE_SE3:QUAT ")) {
      edges++;
      // 2 ids + 7 pose values + 21 information values
      std::istringstream ls(line);
      std::string tok;
      int count = 0;
      while (ls >> tok) count++;
      CHECK(count == 1 + 2 + 7 + 21);
    }
  }
  CHECK(vertices == 3);
  CHECK(edges == 3);
}
