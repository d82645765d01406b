#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "raymem/cli.hpp"
#include "raymem/io.hpp"
#include "raymem/pipeline.hpp"

#include <array>

namespace py = pybind11;
using namespace raymem;

namespace {

using Triple = std::array<double, 3>;

Vec3 to_vec3(const Triple& v) { return Vec3(v[0], v[1], v[2]); }
Triple from_vec3(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

ScenePointer make_pointer(const Triple& position, const Triple& ray,
                          const std::vector<float>& feature, FrameIndex frame_index) {
  ScenePointer p;
  p.position = to_vec3(position);
  p.ray = UnitDir(to_vec3(ray));
  p.feature = Eigen::Map<const Eigen::VectorXf>(feature.data(), feature.size());
  p.frame_index = frame_index;
  return p;
}

py::dict report_to_dict(const MetricsReport& m) {
  auto opt = [](const std::optional<double>& v) -> py::object {
    return v ? py::cast(*v) : py::none();
  };
  py::dict d;
  d["ate_rmse"] = opt(m.ate_rmse);
  d["rpe_trans"] = opt(m.rpe_trans);
  d["rpe_rot"] = opt(m.rpe_rot);
  d["acc_mean"] = opt(m.acc_mean);
  d["acc_median"] = opt(m.acc_median);
  d["comp_mean"] = opt(m.comp_mean);
  d["comp_median"] = opt(m.comp_median);
  d["nc_mean"] = opt(m.nc_mean);
  d["nc_median"] = opt(m.nc_median);
  d["memory_count"] = m.memory_count ? py::cast(*m.memory_count) : py::none();
  return d;
}

PointCloud make_cloud(const std::vector<Triple>& points,
                      const std::vector<Triple>& normals) {
  PointCloud c;
  for (const Triple& p : points) c.points.push_back(to_vec3(p));
  for (const Triple& n : normals) c.normals.push_back(UnitDir(to_vec3(n)));
  return c;
}

Trajectory make_trajectory(const std::vector<std::pair<FrameIndex, std::array<double, 7>>>& raw) {
  Trajectory t;
  for (const auto& [frame, v] : raw) {
    t.push_back({frame, Pose(Eigen::Quaterniond(v[6], v[3], v[4], v[5]), Vec3(v[0], v[1], v[2]))});
  }
  return t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Ray-aware scene memory for streaming 3D reconstruction";

  py::enum_<ObservationKind>(m, "ObservationKind")
      .value("LOCAL_REDUNDANCY", ObservationKind::kLocalRedundancy)
      .value("LOOP_REVISIT", ObservationKind::kLoopRevisit)
      .value("NOVEL_GEOMETRY", ObservationKind::kNovelGeometry);

  py::enum_<UpdatePolicy>(m, "UpdatePolicy")
      .value("RETAIN_OR_REPLACE", UpdatePolicy::kRetainOrReplace)
      .value("KEEP_EXISTING", UpdatePolicy::kKeepExisting)
      .value("REPLACE_EXISTING", UpdatePolicy::kReplaceExisting)
      .value("APPEND_ONLY", UpdatePolicy::kAppendOnly);

  py::class_<MemoryConfig>(m, "MemoryConfig")
      .def(py::init<>())
      .def_readwrite("radius_r", &MemoryConfig::radius_r)
      .def_readwrite("lambda_pos", &MemoryConfig::lambda_pos)
      .def_readwrite("lambda_ang", &MemoryConfig::lambda_ang)
      .def_readwrite("lambda_feat", &MemoryConfig::lambda_feat)
      .def_readwrite("eps_pos", &MemoryConfig::eps_pos)
      .def_readwrite("eps_ang", &MemoryConfig::eps_ang)
      .def_readwrite("delta_t_frames", &MemoryConfig::delta_t_frames)
      .def_readwrite("feature_dim", &MemoryConfig::feature_dim)
      .def_readwrite("rng_seed", &MemoryConfig::rng_seed)
      .def_readwrite("policy", &MemoryConfig::policy)
      .def("validate", &MemoryConfig::validate);

  py::class_<ScenePointer>(m, "ScenePointer")
      .def(py::init(&make_pointer), py::arg("position"), py::arg("ray"), py::arg("feature"),
           py::arg("frame_index"))
      .def_property_readonly("id", [](const ScenePointer& p) { return p.id; })
      .def_property_readonly("position",
                             [](const ScenePointer& p) { return from_vec3(p.position); })
      .def_property_readonly("ray", [](const ScenePointer& p) { return from_vec3(p.ray.vec()); })
      .def_property_readonly("feature",
                             [](const ScenePointer& p) {
                               return std::vector<float>(p.feature.data(),
                                                         p.feature.data() + p.feature.size());
                             })
      .def_property_readonly("frame_index",
                             [](const ScenePointer& p) { return p.frame_index; });

  py::class_<Classification>(m, "Classification")
      .def_readonly("kind", &Classification::kind)
      .def_property_readonly("nearest_id",
                             [](const Classification& c) -> py::object {
                               return c.nearest_id ? py::cast(*c.nearest_id) : py::none();
                             })
      .def_readonly("joint_distance", &Classification::joint_distance);

  py::class_<UpdateReport>(m, "UpdateReport")
      .def_readonly("frame_index", &UpdateReport::frame_index)
      .def_readonly("n_input", &UpdateReport::n_input)
      .def_readonly("n_added", &UpdateReport::n_added)
      .def_readonly("n_replaced", &UpdateReport::n_replaced)
      .def_readonly("n_discarded_new", &UpdateReport::n_discarded_new)
      .def_readonly("n_loop_flagged", &UpdateReport::n_loop_flagged)
      .def_readonly("memory_size_after", &UpdateReport::memory_size_after);

  py::class_<MemoryStore>(m, "MemoryStore")
      .def(py::init<const MemoryConfig&>())
      .def("__len__", &MemoryStore::size)
      .def_property_readonly("frame_counter", &MemoryStore::frame_counter)
      .def("radius_query",
           [](const MemoryStore& s, const Triple& x, double r) {
             return s.radius_query(to_vec3(x), r);
           })
      .def("classify", &MemoryStore::classify)
      .def("insert_frame", &MemoryStore::insert_frame)
      .def("positions",
           [](const MemoryStore& s) {
             std::vector<Triple> out;
             for (const ScenePointer* rec : s.ordered_records()) {
               out.push_back(from_vec3(rec->position));
             }
             return out;
           })
      .def("stats", [](const MemoryStore& s) {
        const MemoryStats st = s.stats();
        py::dict d;
        d["count"] = st.count;
        d["occupied_cells"] = st.occupied_cells;
        d["max_cell_load"] = st.max_cell_load;
        py::dict hist;
        for (const auto& [frame, n] : st.per_frame) hist[py::cast(frame)] = n;
        d["per_frame"] = hist;
        return d;
      });

  m.def("joint_distance", &joint_distance, py::arg("a"), py::arg("b"), py::arg("config"));

  m.def(
      "accuracy",
      [](const std::vector<Triple>& pred, const std::vector<Triple>& gt) {
        const DistanceStats s = accuracy(make_cloud(pred, {}), make_cloud(gt, {}));
        return py::make_tuple(s.mean, s.median);
      },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "completeness",
      [](const std::vector<Triple>& pred, const std::vector<Triple>& gt) {
        const DistanceStats s = completeness(make_cloud(pred, {}), make_cloud(gt, {}));
        return py::make_tuple(s.mean, s.median);
      },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "ate_rmse",
      [](const std::vector<std::pair<FrameIndex, std::array<double, 7>>>& est,
         const std::vector<std::pair<FrameIndex, std::array<double, 7>>>& gt) {
        return ate_rmse(make_trajectory(est), make_trajectory(gt));
      },
      py::arg("est"), py::arg("gt"),
      "Trajectories as [(frame, [tx ty tz qx qy qz qw]), ...]");

  m.def(
      "run_scenario_config",
      [](const std::string& config_text) {
        const ScenarioConfig cfg = parse_config_text(config_text, "<config>");
        const ScenarioResult result = run_scenario(cfg.sim, cfg.memory, cfg.loop);
        py::dict d;
        d["pre"] = report_to_dict(result.pre);
        d["post"] = report_to_dict(result.post);
        d["n_frames"] = result.stream.size();
        d["n_loop_events"] = result.loop_events.size();
        d["memory_count"] = result.final_store.size();
        return d;
      },
      py::arg("config_text"),
      "Run a synthetic scenario from config text and return its metrics");

  m.def("cmd_simulate", &cli::cmd_simulate, py::arg("config_path"), py::arg("out_dir"),
        py::arg("options") = cli::GlobalOptions{});
  m.def("cmd_ingest", &cli::cmd_ingest, py::arg("stream_path"), py::arg("config_path"),
        py::arg("out_dir"), py::arg("options") = cli::GlobalOptions{});
  m.def("cmd_eval", &cli::cmd_eval, py::arg("pred_ply"), py::arg("gt_ply"), py::arg("est_traj"),
        py::arg("gt_traj"), py::arg("out_csv"), py::arg("options") = cli::GlobalOptions{});

  py::class_<cli::GlobalOptions>(m, "GlobalOptions")
      .def(py::init<>())
      .def_readwrite("log_level", &cli::GlobalOptions::log_level)
      .def_property(
          "seed",
          [](const cli::GlobalOptions& o) -> py::object {
            return o.seed ? py::cast(*o.seed) : py::none();
          },
          [](cli::GlobalOptions& o, std::optional<std::uint64_t> v) { o.seed = v; });

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
