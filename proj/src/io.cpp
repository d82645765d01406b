#include "raymem/io.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace raymem {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail_at(const std::string& origin, int line, const std::string& msg) {
  throw InputError(origin + ":" + std::to_string(line) + ": " + msg);
}

std::array<double, 7> pose_to_seven(const Pose& p) {
  const Eigen::Quaterniond& q = p.rotation();
  return {p.translation().x(), p.translation().y(), p.translation().z(),
          q.x(), q.y(), q.z(), q.w()};
}

Pose pose_from_seven(const std::array<double, 7>& v) {
  return Pose(Eigen::Quaterniond(v[6], v[3], v[4], v[5]), Vec3(v[0], v[1], v[2]));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ordered_json metrics_to_json(const MetricsReport& m) {
  auto opt = [](const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
  };
  ordered_json j;
  j["ate_rmse"] = opt(m.ate_rmse);
  j["rpe_trans"] = opt(m.rpe_trans);
  j["rpe_rot"] = opt(m.rpe_rot);
  j["acc_mean"] = opt(m.acc_mean);
  j["acc_median"] = opt(m.acc_median);
  j["comp_mean"] = opt(m.comp_mean);
  j["comp_median"] = opt(m.comp_median);
  j["nc_mean"] = opt(m.nc_mean);
  j["nc_median"] = opt(m.nc_median);
  j["memory_count"] = m.memory_count ? ordered_json(*m.memory_count) : ordered_json(nullptr);
  return j;
}

const std::map<std::string, SceneKind> kSceneKinds = {
    {"box_room", SceneKind::kBoxRoom},
    {"corridor", SceneKind::kCorridor},
    {"plane", SceneKind::kPlane},
};
const std::map<std::string, TrajectoryKind> kTrajectoryKinds = {
    {"square_loop", TrajectoryKind::kSquareLoop},
    {"straight_line", TrajectoryKind::kStraightLine},
    {"figure_eight", TrajectoryKind::kFigureEight},
};
const std::map<std::string, UpdatePolicy> kPolicies = {
    {"retain_or_replace", UpdatePolicy::kRetainOrReplace},
    {"keep_existing", UpdatePolicy::kKeepExisting},
    {"replace_existing", UpdatePolicy::kReplaceExisting},
    {"append_only", UpdatePolicy::kAppendOnly},
};

template <typename T>
std::string name_of(const std::map<std::string, T>& table, T value) {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "?";
}

}  // namespace

void ScenarioConfig::validate() const {
  sim.validate();
  memory.validate();
  loop.validate();
}

ScenarioConfig parse_config_text(const std::string& text, const std::string& origin) {
  ScenarioConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;

  auto parse_double = [&](const std::string& v, int line) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) fail_at(origin, line, "trailing characters after number '" + v + "'");
      return d;
    } catch (const InputError&) {
      throw;
    } catch (const std::exception&) {
      fail_at(origin, line, "expected a number, got '" + v + "'");
    }
  };
  auto parse_int = [&](const std::string& v, int line) {
    const double d = parse_double(v, line);
    if (d != std::floor(d)) fail_at(origin, line, "expected an integer, got '" + v + "'");
    return static_cast<std::int64_t>(d);
  };
  auto parse_u64 = [&](const std::string& v, int line) -> std::uint64_t {
    try {
      std::size_t used = 0;
      const std::uint64_t u = std::stoull(v, &used);
      if (used != v.size()) fail_at(origin, line, "trailing characters after seed '" + v + "'");
      return u;
    } catch (const InputError&) {
      throw;
    } catch (const std::exception&) {
      fail_at(origin, line, "expected an unsigned integer, got '" + v + "'");
    }
  };
  auto parse_bool = [&](const std::string& v, int line) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail_at(origin, line, "expected true/false, got '" + v + "'");
  };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string s = raw;
    const auto hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;

    const auto eq = s.find('=');
    if (eq == std::string::npos) fail_at(origin, line_no, "expected 'section.key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty() || value.empty()) fail_at(origin, line_no, "empty key or value");

    if (key == "scene.kind") {
      auto it = kSceneKinds.find(value);
      if (it == kSceneKinds.end()) fail_at(origin, line_no, "unknown scene kind '" + value + "'");
      cfg.sim.scene.kind = it->second;
      cfg.scene_specified = true;
    } else if (key == "scene.extent_x") {
      cfg.sim.scene.extents.x() = parse_double(value, line_no);
    } else if (key == "scene.extent_y") {
      cfg.sim.scene.extents.y() = parse_double(value, line_no);
    } else if (key == "scene.extent_z") {
      cfg.sim.scene.extents.z() = parse_double(value, line_no);
    } else if (key == "scene.spacing") {
      cfg.sim.scene.spacing = parse_double(value, line_no);
    } else if (key == "scene.seed") {
      cfg.sim.scene.seed = parse_u64(value, line_no);
    } else if (key == "trajectory.kind") {
      auto it = kTrajectoryKinds.find(value);
      if (it == kTrajectoryKinds.end()) {
        fail_at(origin, line_no, "unknown trajectory kind '" + value + "'");
      }
      cfg.sim.trajectory.kind = it->second;
    } else if (key == "trajectory.n_frames") {
      cfg.sim.trajectory.n_frames = static_cast<int>(parse_int(value, line_no));
    } else if (key == "trajectory.speed") {
      cfg.sim.trajectory.speed = parse_double(value, line_no);
    } else if (key == "trajectory.laps") {
      cfg.sim.trajectory.laps = static_cast<int>(parse_int(value, line_no));
    } else if (key == "trajectory.revisit_reverse_heading") {
      cfg.sim.trajectory.revisit_with_reverse_heading = parse_bool(value, line_no);
    } else if (key == "noise.point_sigma") {
      cfg.sim.noise.point_noise_sigma = parse_double(value, line_no);
    } else if (key == "noise.odometry_trans_sigma") {
      cfg.sim.noise.odometry_trans_sigma = parse_double(value, line_no);
    } else if (key == "noise.odometry_yaw_bias_deg") {
      cfg.sim.noise.odometry_yaw_bias_deg = parse_double(value, line_no);
    } else if (key == "noise.feature_sigma") {
      cfg.sim.noise.feature_noise_sigma = parse_double(value, line_no);
    } else if (key == "noise.seed") {
      cfg.sim.noise.seed = parse_u64(value, line_no);
    } else if (key == "sim.max_range") {
      cfg.sim.max_range = parse_double(value, line_no);
    } else if (key == "sim.fov_deg") {
      cfg.sim.fov_deg = parse_double(value, line_no);
    } else if (key == "sim.occlusion") {
      cfg.sim.occlusion = parse_bool(value, line_no);
    } else if (key == "memory.radius_r") {
      cfg.memory.radius_r = parse_double(value, line_no);
    } else if (key == "memory.lambda_pos") {
      cfg.memory.lambda_pos = parse_double(value, line_no);
    } else if (key == "memory.lambda_ang") {
      cfg.memory.lambda_ang = parse_double(value, line_no);
    } else if (key == "memory.lambda_feat") {
      cfg.memory.lambda_feat = parse_double(value, line_no);
    } else if (key == "memory.eps_pos") {
      cfg.memory.eps_pos = parse_double(value, line_no);
    } else if (key == "memory.eps_ang") {
      cfg.memory.eps_ang = parse_double(value, line_no);
    } else if (key == "memory.delta_t_frames") {
      cfg.memory.delta_t_frames = parse_int(value, line_no);
    } else if (key == "memory.feature_dim") {
      cfg.memory.feature_dim = static_cast<int>(parse_int(value, line_no));
    } else if (key == "memory.rng_seed") {
      cfg.memory.rng_seed = parse_u64(value, line_no);
    } else if (key == "memory.policy") {
      auto it = kPolicies.find(value);
      if (it == kPolicies.end()) fail_at(origin, line_no, "unknown policy '" + value + "'");
      cfg.memory.policy = it->second;
    } else if (key == "loop.enabled") {
      cfg.loop.enabled = parse_bool(value, line_no);
    } else if (key == "loop.min_pairs") {
      cfg.loop.min_pairs = static_cast<int>(parse_int(value, line_no));
    } else if (key == "loop.info_scale") {
      cfg.loop.info_scale = parse_double(value, line_no);
    } else if (key == "loop.huber_delta") {
      cfg.loop.huber_delta = parse_double(value, line_no);
    } else if (key == "loop.robust_kernel") {
      cfg.loop.robust_kernel = parse_bool(value, line_no);
    } else if (key == "loop.max_iterations") {
      cfg.loop.max_iterations = static_cast<int>(parse_int(value, line_no));
    } else if (key == "loop.tolerance") {
      cfg.loop.tolerance = parse_double(value, line_no);
    } else if (key == "loop.sparsify_keep_fraction") {
      cfg.loop.sparsify_keep_fraction = parse_double(value, line_no);
    } else if (key == "loop.info_score_k") {
      cfg.loop.info_score_k = static_cast<int>(parse_int(value, line_no));
    } else if (key == "loop.max_correction_rot_deg") {
      cfg.loop.max_correction_rot_deg = parse_double(value, line_no);
    } else {
      fail_at(origin, line_no, "unknown key '" + key + "'");
    }
  }

  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(origin + ": " + e.what());
  }
  return cfg;
}

ScenarioConfig parse_config_file(const std::filesystem::path& path) {
  return parse_config_text(read_file(path), path.string());
}

void write_stream_jsonl(const std::filesystem::path& path,
                        const std::vector<StreamFrame>& frames) {
  std::ostringstream out;
  for (const StreamFrame& f : frames) {
    ordered_json j;
    j["frame"] = f.frame;
    j["pose_est"] = pose_to_seven(f.pose_est);
    if (f.pose_true) j["pose_true"] = pose_to_seven(*f.pose_true);
    ordered_json points = ordered_json::array();
    for (const ScenePointer& p : f.points) {
      ordered_json jp;
      jp["p"] = {p.position.x(), p.position.y(), p.position.z()};
      jp["r"] = {p.ray.vec().x(), p.ray.vec().y(), p.ray.vec().z()};
      ordered_json feat = ordered_json::array();
      for (int i = 0; i < p.feature.size(); ++i) feat.push_back(p.feature(i));
      jp["f"] = std::move(feat);
      points.push_back(std::move(jp));
    }
    j["points"] = std::move(points);
    out << j.dump() << '\n';
  }
  atomic_write(path, out.str());
}

std::vector<StreamFrame> read_stream_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  const std::string origin = path.string();

  std::vector<StreamFrame> frames;
  std::string line;
  int line_no = 0;
  int feature_dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      fail_at(origin, line_no, std::string("malformed JSON: ") + e.what());
    }
    StreamFrame f;
    try {
      f.frame = j.at("frame").get<FrameIndex>();
      f.pose_est = pose_from_seven(j.at("pose_est").get<std::array<double, 7>>());
      if (j.contains("pose_true") && !j["pose_true"].is_null()) {
        f.pose_true = pose_from_seven(j["pose_true"].get<std::array<double, 7>>());
      }
      for (const auto& jp : j.at("points")) {
        ScenePointer p;
        const auto pos = jp.at("p").get<std::array<double, 3>>();
        p.position = Vec3(pos[0], pos[1], pos[2]);
        const auto ray = jp.at("r").get<std::array<double, 3>>();
        const Vec3 rv(ray[0], ray[1], ray[2]);
        if (rv.norm() < 1e-12) fail_at(origin, line_no, "zero ray vector");
        p.ray = UnitDir(rv);
        const auto feat = jp.at("f").get<std::vector<float>>();
        if (feature_dim < 0) feature_dim = static_cast<int>(feat.size());
        if (static_cast<int>(feat.size()) != feature_dim) {
          fail_at(origin, line_no, "inconsistent feature length across stream");
        }
        p.feature = Eigen::Map<const Eigen::VectorXf>(feat.data(), feat.size());
        p.frame_index = f.frame;
        f.points.push_back(std::move(p));
      }
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& e) {
      fail_at(origin, line_no, std::string("bad stream record: ") + e.what());
    }
    if (!frames.empty() && f.frame <= frames.back().frame) {
      fail_at(origin, line_no, "frames not strictly increasing");
    }
    frames.push_back(std::move(f));
  }
  if (frames.empty()) throw InputError(origin + ": empty stream");
  return frames;
}

void export_memory_ply(const MemoryStore& store, const std::filesystem::path& ply_path,
                       const std::filesystem::path& sidecar_path) {
  const std::vector<const ScenePointer*> records = store.ordered_records();
  const int dim = store.config().feature_dim;

  std::ostringstream ply;
  ply << "ply\nformat ascii 1.0\n";
  ply << "comment ray-aware memory snapshot; normal channels store viewing rays\n";
  ply << "comment feature_dim " << dim << "\n";
  ply << "element vertex " << records.size() << "\n";
  ply << "property float x\nproperty float y\nproperty float z\n";
  ply << "property float nx\nproperty float ny\nproperty float nz\n";
  ply << "property int frame_index\nend_header\n";

  std::string features;
  features.reserve(records.size() * dim * 4);
  for (const ScenePointer* rec : records) {
    ply << fmt_float(static_cast<float>(rec->position.x())) << ' '
        << fmt_float(static_cast<float>(rec->position.y())) << ' '
        << fmt_float(static_cast<float>(rec->position.z())) << ' '
        << fmt_float(static_cast<float>(rec->ray.vec().x())) << ' '
        << fmt_float(static_cast<float>(rec->ray.vec().y())) << ' '
        << fmt_float(static_cast<float>(rec->ray.vec().z())) << ' ' << rec->frame_index << '\n';
    for (int i = 0; i < dim; ++i) {
      const float v = rec->feature(i);
      // Little-endian float32, row-major, record order = vertex order.
      static_assert(sizeof(float) == 4);
      const char* bytes = reinterpret_cast<const char*>(&v);
      features.append(bytes, 4);
    }
  }
  atomic_write(ply_path, ply.str());
  atomic_write(sidecar_path, features);
}

namespace {

struct PlyHeader {
  std::size_t vertex_count = 0;
  std::vector<std::string> properties;
  std::map<std::string, std::string> comments;  // first token -> rest
  int header_lines = 0;
};

PlyHeader parse_ply_header(std::istream& in, const std::string& origin) {
  PlyHeader h;
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line) || trim(line) != "ply") {
    fail_at(origin, 1, "not a PLY file");
  }
  ++line_no;
  if (!std::getline(in, line) || trim(line) != "format ascii 1.0") {
    fail_at(origin, 2, "only 'format ascii 1.0' is supported");
  }
  ++line_no;
  bool in_vertex = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(trim(line));
    std::string tok;
    ls >> tok;
    if (tok == "end_header") {
      h.header_lines = line_no;
      return h;
    }
    if (tok == "comment") {
      std::string key, rest;
      ls >> key;
      std::getline(ls, rest);
      h.comments[key] = trim(rest);
    } else if (tok == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (name == "vertex") {
        h.vertex_count = count;
        in_vertex = true;
      } else {
        if (count > 0) fail_at(origin, line_no, "unsupported element '" + name + "'");
        in_vertex = false;
      }
    } else if (tok == "property") {
      std::string type, name;
      ls >> type >> name;
      if (type == "list") fail_at(origin, line_no, "list properties are not supported");
      if (in_vertex) h.properties.push_back(name);
    } else if (!tok.empty()) {
      fail_at(origin, line_no, "unexpected header line '" + tok + "'");
    }
  }
  fail_at(origin, line_no, "missing end_header");
}

}  // namespace

MemorySnapshot import_memory_ply(const std::filesystem::path& ply_path,
                                 const std::filesystem::path& sidecar_path) {
  std::ifstream in(ply_path);
  if (!in) throw InputError("cannot open " + ply_path.string());
  const std::string origin = ply_path.string();
  const PlyHeader header = parse_ply_header(in, origin);

  const std::vector<std::string> expected = {"x", "y", "z", "nx", "ny", "nz", "frame_index"};
  if (header.properties != expected) {
    throw InputError(origin + ": memory snapshot needs properties x y z nx ny nz frame_index");
  }
  auto it = header.comments.find("feature_dim");
  if (it == header.comments.end()) throw InputError(origin + ": missing feature_dim comment");
  const int dim = std::stoi(it->second);
  if (dim <= 0) throw InputError(origin + ": bad feature_dim");

  const std::string blob = read_file(sidecar_path);
  if (blob.size() != header.vertex_count * static_cast<std::size_t>(dim) * 4) {
    throw InputError(sidecar_path.string() + ": sidecar size does not match vertex count");
  }

  MemorySnapshot snap;
  snap.feature_dim = dim;
  snap.records.reserve(header.vertex_count);
  std::string line;
  for (std::size_t i = 0; i < header.vertex_count; ++i) {
    if (!std::getline(in, line)) {
      fail_at(origin, header.header_lines + static_cast<int>(i) + 1, "truncated vertex data");
    }
    std::istringstream ls(line);
    double x, y, z, nx, ny, nz;
    long long frame;
    if (!(ls >> x >> y >> z >> nx >> ny >> nz >> frame)) {
      fail_at(origin, header.header_lines + static_cast<int>(i) + 1, "bad vertex row");
    }
    ScenePointer rec;
    rec.position = Vec3(x, y, z);
    rec.ray = UnitDir(Vec3(nx, ny, nz));
    rec.frame_index = frame;
    rec.feature.resize(dim);
    std::memcpy(rec.feature.data(), blob.data() + i * dim * 4, dim * 4);
    snap.records.push_back(std::move(rec));
  }
  return snap;
}

void export_cloud_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << cloud.points.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (cloud.has_normals()) {
    out << "property float nx\nproperty float ny\nproperty float nz\n";
  }
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << fmt_float(static_cast<float>(p.x())) << ' ' << fmt_float(static_cast<float>(p.y()))
        << ' ' << fmt_float(static_cast<float>(p.z()));
    if (cloud.has_normals()) {
      const Vec3& n = cloud.normals[i].vec();
      out << ' ' << fmt_float(static_cast<float>(n.x())) << ' '
          << fmt_float(static_cast<float>(n.y())) << ' ' << fmt_float(static_cast<float>(n.z()));
    }
    out << '\n';
  }
  atomic_write(path, out.str());
}

PointCloud read_cloud_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  const std::string origin = path.string();
  const PlyHeader header = parse_ply_header(in, origin);

  auto index_of = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < header.properties.size(); ++i) {
      if (header.properties[i] == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
  if (ix < 0 || iy < 0 || iz < 0) throw InputError(origin + ": missing x/y/z properties");
  const int inx = index_of("nx"), iny = index_of("ny"), inz = index_of("nz");
  const bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;

  PointCloud cloud;
  cloud.points.reserve(header.vertex_count);
  std::string line;
  std::vector<double> row(header.properties.size());
  for (std::size_t i = 0; i < header.vertex_count; ++i) {
    if (!std::getline(in, line)) {
      fail_at(origin, header.header_lines + static_cast<int>(i) + 1, "truncated vertex data");
    }
    std::istringstream ls(line);
    for (double& v : row) {
      if (!(ls >> v)) {
        fail_at(origin, header.header_lines + static_cast<int>(i) + 1, "bad vertex row");
      }
    }
    cloud.points.emplace_back(row[ix], row[iy], row[iz]);
    if (with_normals) {
      cloud.normals.emplace_back(Vec3(row[inx], row[iny], row[inz]));
    }
  }
  return cloud;
}

void write_tum_trajectory(const std::filesystem::path& path, const Trajectory& trajectory) {
  std::ostringstream out;
  for (const TrajectoryEntry& e : trajectory) {
    const auto v = pose_to_seven(e.pose);
    out << e.frame;
    for (double x : v) out << ' ' << fmt_double(x);
    out << '\n';
  }
  atomic_write(path, out.str());
}

Trajectory read_tum_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  const std::string origin = path.string();
  Trajectory out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::istringstream ls(s);
    double t;
    std::array<double, 7> v{};
    if (!(ls >> t >> v[0] >> v[1] >> v[2] >> v[3] >> v[4] >> v[5] >> v[6])) {
      fail_at(origin, line_no, "expected 't tx ty tz qx qy qz qw'");
    }
    out.push_back({static_cast<FrameIndex>(std::llround(t)), pose_from_seven(v)});
  }
  if (out.empty()) throw InputError(origin + ": empty trajectory");
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report) {
  atomic_write(path, MetricsReport::csv_header() + "\n" + report.csv_row() + "\n");
}

namespace {

ordered_json config_to_json(const ScenarioConfig& cfg) {
  ordered_json j;
  j["scene"] = {{"kind", name_of(kSceneKinds, cfg.sim.scene.kind)},
                {"extent_x", cfg.sim.scene.extents.x()},
                {"extent_y", cfg.sim.scene.extents.y()},
                {"extent_z", cfg.sim.scene.extents.z()},
                {"spacing", cfg.sim.scene.spacing},
                {"seed", cfg.sim.scene.seed},
                {"specified", cfg.scene_specified}};
  j["trajectory"] = {{"kind", name_of(kTrajectoryKinds, cfg.sim.trajectory.kind)},
                     {"n_frames", cfg.sim.trajectory.n_frames},
                     {"speed", cfg.sim.trajectory.speed},
                     {"laps", cfg.sim.trajectory.laps},
                     {"revisit_reverse_heading", cfg.sim.trajectory.revisit_with_reverse_heading}};
  j["noise"] = {{"point_sigma", cfg.sim.noise.point_noise_sigma},
                {"odometry_trans_sigma", cfg.sim.noise.odometry_trans_sigma},
                {"odometry_yaw_bias_deg", cfg.sim.noise.odometry_yaw_bias_deg},
                {"feature_sigma", cfg.sim.noise.feature_noise_sigma},
                {"seed", cfg.sim.noise.seed}};
  j["sim"] = {{"max_range", cfg.sim.max_range},
              {"fov_deg", cfg.sim.fov_deg},
              {"occlusion", cfg.sim.occlusion}};
  j["memory"] = {{"radius_r", cfg.memory.radius_r},
                 {"lambda_pos", cfg.memory.lambda_pos},
                 {"lambda_ang", cfg.memory.lambda_ang},
                 {"lambda_feat", cfg.memory.lambda_feat},
                 {"eps_pos", cfg.memory.eps_pos},
                 {"eps_ang", cfg.memory.eps_ang},
                 {"delta_t_frames", cfg.memory.delta_t_frames},
                 {"feature_dim", cfg.memory.feature_dim},
                 {"rng_seed", cfg.memory.rng_seed},
                 {"policy", name_of(kPolicies, cfg.memory.policy)}};
  j["loop"] = {{"enabled", cfg.loop.enabled},
               {"min_pairs", cfg.loop.min_pairs},
               {"info_scale", cfg.loop.info_scale},
               {"huber_delta", cfg.loop.huber_delta},
               {"robust_kernel", cfg.loop.robust_kernel},
               {"max_iterations", cfg.loop.max_iterations},
               {"tolerance", cfg.loop.tolerance},
               {"sparsify_keep_fraction", cfg.loop.sparsify_keep_fraction},
               {"info_score_k", cfg.loop.info_score_k},
               {"max_correction_rot_deg", cfg.loop.max_correction_rot_deg}};
  return j;
}

}  // namespace

void write_manifest_json(const std::filesystem::path& path, const RunSummary& summary) {
  ordered_json j;
  j["version"] = "0.1.0";
  j["config"] = config_to_json(summary.config);
  j["seeds"] = {{"scene", summary.config.sim.scene.seed},
                {"noise", summary.config.sim.noise.seed},
                {"memory", summary.config.memory.rng_seed}};
  ordered_json frames = ordered_json::array();
  for (const UpdateReport& r : summary.frame_reports) {
    frames.push_back({{"frame", r.frame_index},
                      {"n_input", r.n_input},
                      {"n_added", r.n_added},
                      {"n_replaced", r.n_replaced},
                      {"n_discarded_new", r.n_discarded_new},
                      {"n_loop_flagged", r.n_loop_flagged},
                      {"memory_size_after", r.memory_size_after}});
  }
  j["frames"] = std::move(frames);
  ordered_json events = ordered_json::array();
  for (const LoopEvent& e : summary.loop_events) {
    events.push_back({{"frame", e.frame},
                      {"n_candidates", e.n_candidates},
                      {"n_edges", e.n_edges},
                      {"dropped_groups", e.dropped_groups},
                      {"cost_initial", e.cost_initial},
                      {"cost_final", e.cost_final},
                      {"iterations", e.iterations},
                      {"n_sparsified", e.n_sparsified}});
  }
  j["loop_events"] = std::move(events);
  j["metrics_pre"] = metrics_to_json(summary.pre);
  j["metrics_post"] = metrics_to_json(summary.post);
  atomic_write(path, j.dump(2) + "\n");
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace raymem
