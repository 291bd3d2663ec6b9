#include "egoexo/dataset_store.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <numbers>
#include <regex>
#include <set>

#include <unistd.h>

#include "egoexo/error.hpp"
#include "egoexo/geoproc.hpp"
#include "egoexo/image_io.hpp"
#include "egoexo/pose_io.hpp"

namespace egoexo {
namespace fs = std::filesystem;

namespace {

constexpr double kOrthoTolerance = 1e-6;

Json vec3(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json matrix_json(const Eigen::Matrix4d& m) {
  Json rows = Json::array();
  for (int r = 0; r < 4; ++r) rows.push_back(Json::array({m(r, 0), m(r, 1), m(r, 2), m(r, 3)}));
  return rows;
}

std::string_view kind_name(ActorKind kind) { return kind == ActorKind::kVehicle ? "vehicle" : "pedestrian"; }

std::string sensor_ref(int index, SensorKind kind) { return "../sensors/" + sensor_file_name(index, kind); }

Json encodings_json(bool flow, bool lidar) {
  Json j{
      {"depth",
       {{"format", "png_gray16"},
        {"unit", "millimeter"},
        {"invalid", 0},
        {"max_m", 65.535},
        {"quantity", "planar depth along the camera -Z axis"}}},
      {"semantic_seg", {{"format", "png_gray16"}, {"labels", "CARLA 0.9.15 semantic tags"}}},
      {"instance_seg", {{"format", "png_gray16"}, {"background", 0}}},
  };
  if (flow) {
    j["optical_flow"] = {{"format", "png_rgb16"},
                         {"channels", Json::array({"du", "dv", "valid"})},
                         {"value", "pixels * 64 + 32768"},
                         {"direction", "current frame to next frame"}};
  }
  if (lidar) {
    j["lidar"] = {{"format", "ply binary_little_endian float32 x y z intensity"}, {"frame", "world, OPENGL"}};
  }
  return j;
}

// Points of the full sweep that fall inside one camera's image.
PointCloud frustum_points(const PointCloud& sweep, const CameraCapture& cam, double range_m) {
  PointCloud out;
  const auto& k = cam.intrinsics;
  for (const auto& p : sweep.points) {
    const auto uvd = project_point(p.head<3>(), k, cam.pose);
    if (!uvd || uvd->z() > range_m) continue;
    if (uvd->x() < -0.5 || uvd->y() < -0.5 || uvd->x() >= k.width - 0.5 || uvd->y() >= k.height - 0.5) continue;
    out.points.push_back(p);
  }
  return out;
}

void write_frame(const fs::path& sensors, int index, const SensorFrame& frame, std::vector<fs::path>& written) {
  auto put = [&](SensorKind kind) {
    written.push_back(sensors / sensor_file_name(index, kind));
    return written.back();
  };
  write_png_rgb8(put(SensorKind::kRgb), frame.rgb);
  write_png_gray16(put(SensorKind::kDepth), encode_depth_mm(frame.depth));
  write_png_gray16(put(SensorKind::kSemantic), frame.semantic);
  write_png_gray16(put(SensorKind::kInstance), frame.instance);
  if (frame.flow) write_png_rgb16(put(SensorKind::kFlow), encode_flow(*frame.flow));
}

bool non_empty_dir(const fs::path& p) { return fs::is_directory(p) && !fs::is_empty(p); }

}  // namespace

std::string_view to_string(SensorKind kind) {
  switch (kind) {
    case SensorKind::kRgb: return "rgb";
    case SensorKind::kDepth: return "depth";
    case SensorKind::kSemantic: return "semantic_seg";
    case SensorKind::kInstance: return "instance_seg";
    case SensorKind::kFlow: return "optical_flow";
    case SensorKind::kLidar: return "lidar";
  }
  return "unknown";
}

std::string sensor_file_name(int index, SensorKind kind) {
  return std::to_string(index) + "_" + std::string(to_string(kind)) + (kind == SensorKind::kLidar ? ".ply" : ".png");
}

std::string capture_variant(const SceneConfig& config) {
  if (!config.capture_without_ego) return "";
  return config.include_ego_vehicle ? "with_ego" : "no_ego";
}

fs::path scene_directory(const fs::path& root, const SceneConfig& config) {
  std::string leaf = "spawn_point_" + std::to_string(config.spawn_point);
  const std::string variant = capture_variant(config);
  if (!variant.empty()) leaf += "_" + variant;
  return root / config.town / config.weather / "vehicle" / leaf;
}

void snapshot_config(const SceneConfig& config, const fs::path& path) {
  SceneConfig resolved = config;
  resolve_presets(resolved);
  write_json_file(path, to_json(resolved));
}

// --- SceneWriter ------------------------------------------------------------

SceneWriter::SceneWriter(fs::path final_dir, bool overwrite) : final_(std::move(final_dir)), overwrite_(overwrite) {
  if (non_empty_dir(final_) && !overwrite_) {
    fail(ErrorCode::kState, "refusing to overwrite non-empty " + final_.string() + " (pass --overwrite)");
  }
  if (fs::exists(final_) && !fs::is_directory(final_)) fail(ErrorCode::kIo, final_.string() + " is not a directory");
  static std::atomic<int> counter{0};
  staging_ = final_.parent_path() /
             ("." + final_.filename().string() + ".staging." + std::to_string(::getpid()) + "." +
              std::to_string(counter++));
  std::error_code ec;
  fs::create_directories(staging_, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + staging_.string() + ": " + ec.message());
}

SceneWriter::~SceneWriter() {
  if (committed_) return;
  std::error_code ec;
  fs::remove_all(staging_, ec);
}

void SceneWriter::write_config(const SceneConfig& config) { snapshot_config(config, staging_ / "config.json"); }

void SceneWriter::write_vehicles(const std::vector<ActorInfo>& actors) {
  Json vehicles = Json::array();
  Json pedestrians = Json::array();
  std::set<std::string> types;
  for (const auto& a : actors) {
    Json entry{{"id", a.id}, {"type_id", a.type_id}, {"kind", kind_name(a.kind)}};
    if (a.kind == ActorKind::kVehicle) {
      entry["is_ego"] = a.is_ego;
      entry["equipped"] = a.equipped;
      entry["parked"] = a.parked;
      entry["speed_mps"] = a.speed_mps;
      types.insert(a.type_id);
      vehicles.push_back(std::move(entry));
    } else {
      pedestrians.push_back(std::move(entry));
    }
  }
  write_json_file(staging_ / "vehicles.json",
                  Json{{"vehicles", vehicles}, {"pedestrians", pedestrians}, {"vehicle_types", types}});
}

std::vector<fs::path> SceneWriter::write_capture(const CaptureBundle& bundle, const LidarConfig& lidar) {
  if (committed_) fail(ErrorCode::kState, "scene already committed");
  std::vector<fs::path> written;
  const fs::path step_dir = staging_ / ("step_" + std::to_string(bundle.step));
  fs::create_directories(step_dir);

  Json boxes = Json::array();
  for (const auto& b : bundle.bboxes) {
    boxes.push_back({{"actor_id", b.actor_id},
                     {"class_id", b.class_id},
                     {"center", vec3(b.center)},
                     {"half_extent", vec3(b.extent)},
                     {"yaw_rad", b.yaw}});
  }
  write_json_file(step_dir / "bboxes.json", Json{{"frame", "world, OPENGL"}, {"boxes", boxes}});
  write_json_file(step_dir / "elapsed_time.json",
                  Json{{"step", bundle.step}, {"elapsed_s", bundle.elapsed}, {"sim_time_s", bundle.sim_time}});
  written.push_back(step_dir / "bboxes.json");
  written.push_back(step_dir / "elapsed_time.json");

  for (const auto& actor : bundle.actors) {
    const fs::path actor_dir = step_dir / std::to_string(actor.actor_id);
    for (const auto& g : actor.groups) {
      const fs::path group_dir = actor_dir / g.group;
      fs::create_directories(group_dir / "sensors");
      fs::create_directories(group_dir / "transforms");
      const bool ego_group = g.group == kEgoGroup;
      const bool frustum_lidar = ego_group && actor.lidar.has_value();

      TransformsDocument doc;
      doc.metadata = {{"convention", "OPENGL"}, {"rig", g.rig_name}, {"rig_version", g.rig_version}};
      Json cameras = Json::array();
      bool flow = false;
      for (std::size_t i = 0; i < g.cameras.size(); ++i) {
        const auto& cam = g.cameras[i];
        const int idx = static_cast<int>(i);
        write_frame(group_dir / "sensors", idx, cam.frame, written);
        flow = flow || cam.frame.flow.has_value();
        if (frustum_lidar) {
          written.push_back(group_dir / "sensors" / sensor_file_name(idx, SensorKind::kLidar));
          write_ply(written.back(), frustum_points(actor.lidar->cloud, cam, lidar.range_m));
        }
        PoseFrame f;
        f.file_path = sensor_ref(idx, SensorKind::kRgb);
        f.depth_file_path = sensor_ref(idx, SensorKind::kDepth);
        f.pose = cam.pose;
        f.intrinsics = cam.intrinsics;
        doc.frames.push_back(std::move(f));
        const auto& k = cam.intrinsics;
        cameras.push_back({{"index", idx},
                           {"name", cam.name},
                           {"fov_deg", i < g.fov_deg.size() ? g.fov_deg[i] : k.horizontal_fov_rad() * 180.0 / std::numbers::pi},
                           {"width", k.width},
                           {"height", k.height},
                           {"fl_x", k.fx},
                           {"fl_y", k.fy},
                           {"cx", k.cx},
                           {"cy", k.cy}});
      }
      write_transforms(doc, group_dir / "transforms" / "transforms.json");
      written.push_back(group_dir / "transforms" / "transforms.json");
      write_json_file(group_dir / "camera_info.json", Json{{"group", g.group},
                                                           {"rig_name", g.rig_name},
                                                           {"rig_version", g.rig_version},
                                                           {"convention", "OPENGL"},
                                                           {"cameras", cameras},
                                                           {"encodings", encodings_json(flow, frustum_lidar)}});
      written.push_back(group_dir / "camera_info.json");
    }

    if (actor.lidar) {
      const fs::path group_dir = actor_dir / kLidarGroup;
      fs::create_directories(group_dir / "sensors");
      fs::create_directories(group_dir / "transforms");
      written.push_back(group_dir / "sensors" / sensor_file_name(0, SensorKind::kLidar));
      write_ply(written.back(), actor.lidar->cloud);
      const Json frame{{"file_path", sensor_ref(0, SensorKind::kLidar)},
                       {"transform_matrix", matrix_json(actor.lidar->pose.matrix())}};
      write_json_file(group_dir / "transforms" / "transforms.json",
                      Json{{"sensor", "lidar"}, {"metadata", {{"convention", "OPENGL"}}}, {"frames", {frame}}});
      written.push_back(group_dir / "transforms" / "transforms.json");
      write_json_file(group_dir / "camera_info.json",
                      Json{{"group", kLidarGroup},
                           {"sensor", "lidar"},
                           {"channels", lidar.channels},
                           {"range_m", lidar.range_m},
                           {"points_per_tick", lidar.points_per_tick},
                           {"upper_fov_deg", lidar.upper_fov_deg},
                           {"lower_fov_deg", lidar.lower_fov_deg},
                           {"encodings", encodings_json(false, true)}});
      written.push_back(group_dir / "camera_info.json");
    }
  }

  for (auto& p : written) p = fs::relative(p, staging_);
  return written;
}

void SceneWriter::commit() {
  if (committed_) fail(ErrorCode::kState, "scene already committed");
  std::error_code ec;
  fs::path trash;
  if (fs::exists(final_)) {
    if (non_empty_dir(final_) && !overwrite_) {
      fail(ErrorCode::kState, "refusing to overwrite non-empty " + final_.string());
    }
    trash = staging_;
    trash += ".old";
    fs::rename(final_, trash, ec);
    if (ec) fail(ErrorCode::kIo, "cannot move aside " + final_.string() + ": " + ec.message());
  }
  fs::rename(staging_, final_, ec);
  if (ec) fail(ErrorCode::kIo, "cannot commit " + final_.string() + ": " + ec.message());
  committed_ = true;
  if (!trash.empty()) fs::remove_all(trash, ec);
}

std::vector<fs::path> generate_scene(Backend& backend, const SceneConfig& config, const fs::path& root,
                                     bool overwrite) {
  std::vector<SceneConfig> variants{config};
  if (config.capture_without_ego && config.include_ego_vehicle) {
    variants.push_back(config);
    variants.back().include_ego_vehicle = false;
  }
  std::vector<fs::path> out;
  for (const auto& variant : variants) {
    auto session = backend.load(variant);
    if (variant.remove_dynamic_vehicles) session->remove_dynamic_vehicles();
    const SceneConfig& realized = session->config();
    SceneWriter writer(scene_directory(root, realized), overwrite);
    writer.write_config(realized);
    writer.write_vehicles(session->actors());
    for (int t = 0; t < realized.timesteps; ++t) writer.write_capture(session->tick(), realized.lidar);
    session->close();
    writer.commit();
    out.push_back(writer.final_dir());
  }
  return out;
}

// --- validation -------------------------------------------------------------

bool LayoutReport::ok() const {
  return std::none_of(violations.begin(), violations.end(),
                      [](const Violation& v) { return v.severity == Severity::kError; });
}

std::size_t LayoutReport::count(std::string_view kind) const {
  return static_cast<std::size_t>(
      std::count_if(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; }));
}

Json LayoutReport::to_json() const {
  Json list = Json::array();
  for (const auto& v : violations) {
    list.push_back({{"severity", v.severity == Severity::kError ? "error" : "warning"},
                    {"kind", v.kind},
                    {"path", v.path.generic_string()},
                    {"message", v.message}});
  }
  return Json{{"ok", ok()}, {"scenes", scenes}, {"images", images}, {"violations", list}};
}

namespace {

const std::regex kSensorName(R"(^(\d+)_(rgb|depth|semantic_seg|instance_seg|optical_flow|lidar)\.(png|ply)$)");
const std::regex kSceneName(R"(^spawn_point_\d+(_with_ego|_no_ego)?$)");
const std::regex kStepName(R"(^step_\d+$)");
const std::regex kActorName(R"(^\d+$)");

class Validator {
 public:
  explicit Validator(LayoutReport& report) : report_(report) {}

  void add(std::string kind, const fs::path& path, std::string message, Severity severity = Severity::kError) {
    report_.violations.push_back({severity, std::move(kind), path, std::move(message)});
  }

  std::vector<fs::directory_entry> list(const fs::path& dir) {
    std::vector<fs::directory_entry> entries;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec)) entries.push_back(e);
    if (ec) add("unreadable", dir, ec.message());
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.path().filename() < b.path().filename(); });
    return entries;
  }

  std::optional<Json> json_file(const fs::path& path) {
    if (!fs::is_regular_file(path)) {
      add("missing file", path, "expected file is missing");
      return std::nullopt;
    }
    try {
      return read_json_file(path);
    } catch (const std::exception& e) {
      add("unparsable json", path, e.what());
      return std::nullopt;
    }
  }

  // Directories that must all match pattern; anything else is flagged.
  std::vector<fs::path> children(const fs::path& dir, const std::regex& pattern, std::string_view what,
                                 const std::set<std::string>& allowed_files = {}) {
    std::vector<fs::path> out;
    for (const auto& e : list(dir)) {
      const std::string name = e.path().filename().string();
      if (e.is_regular_file() && allowed_files.count(name)) continue;
      if (name.find(".staging.") != std::string::npos) {
        add("leftover staging", e.path(), "incomplete scene left by an interrupted writer");
        continue;
      }
      if (!e.is_directory() || !std::regex_match(name, pattern)) {
        add("unexpected entry", e.path(), "expected a " + std::string(what) + " directory");
        continue;
      }
      out.push_back(e.path());
    }
    return out;
  }

  void scene(const fs::path& dir) {
    ++report_.scenes;
    json_file(dir / "config.json");
    json_file(dir / "vehicles.json");
    const auto steps = children(dir, kStepName, "step_<j>", {"config.json", "vehicles.json"});
    if (steps.empty()) add("empty scene", dir, "scene has no step directories");
    for (const auto& step : steps) {
      json_file(step / "bboxes.json");
      json_file(step / "elapsed_time.json");
      for (const auto& actor : children(step, kActorName, "actor id", {"bboxes.json", "elapsed_time.json"})) {
        const auto groups = list(actor);
        if (groups.empty()) add("empty actor", actor, "actor directory has no rig groups");
        for (const auto& g : groups) {
          const std::string name = g.path().filename().string();
          if (!g.is_directory() || (name != kEgoGroup && name != kLidarGroup && name != kExoGroup)) {
            add("unexpected entry", g.path(), "expected nuscenes, nuscenes_lidar or sphere");
          } else if (name == kLidarGroup) {
            lidar_group(g.path());
          } else {
            camera_group(g.path());
          }
        }
      }
    }
  }

  // file name -> (index, kind, ext); bad names are reported.
  std::map<std::string, std::pair<int, std::string>> sensors(const fs::path& dir) {
    std::map<std::string, std::pair<int, std::string>> out;
    if (!fs::is_directory(dir)) {
      add("missing directory", dir, "sensors/ is missing");
      return out;
    }
    for (const auto& e : list(dir)) {
      const std::string name = e.path().filename().string();
      std::smatch m;
      if (!e.is_regular_file() || !std::regex_match(name, m, kSensorName) ||
          ((m[2] == "lidar") != (m[3] == "ply"))) {
        add("bad sensor name", e.path(), "expected <idx>_<kind>.<ext>");
        continue;
      }
      out[name] = {std::stoi(m[1]), m[2]};
    }
    return out;
  }

  void camera_group(const fs::path& dir) {
    json_file(dir / "camera_info.json");
    const auto files = sensors(dir / "sensors");
    std::map<int, std::set<std::string>> by_index;
    bool any_flow = false;
    bool any_lidar = false;
    for (const auto& [name, ik] : files) {
      by_index[ik.first].insert(ik.second);
      any_flow = any_flow || ik.second == "optical_flow";
      any_lidar = any_lidar || ik.second == "lidar";
    }
    std::vector<std::string> required{"rgb", "depth", "semantic_seg", "instance_seg"};
    if (any_flow) required.push_back("optical_flow");
    if (any_lidar) required.push_back("lidar");
    for (const auto& [idx, kinds] : by_index) {
      for (const auto& kind : required) {
        if (!kinds.count(kind)) {
          add("missing aligned sensor", dir / "sensors", "camera " + std::to_string(idx) + " has no " + kind);
        }
      }
      const fs::path rgb = dir / "sensors" / (std::to_string(idx) + "_rgb.png");
      if (!kinds.count("rgb")) continue;
      ++report_.images;
      const auto size = png_size(rgb);
      if (!size) continue;
      for (const auto& kind : kinds) {
        if (kind == "rgb" || kind == "lidar") continue;
        const fs::path other = dir / "sensors" / (std::to_string(idx) + "_" + kind + ".png");
        const auto s = png_size(other);
        if (s && *s != *size) add("size mismatch", other, "differs in size from " + rgb.filename().string());
      }
    }

    const fs::path tf = dir / "transforms" / "transforms.json";
    const auto doc = json_file(tf);
    if (!doc) return;
    const auto problems = check_transforms_json(*doc);
    for (const auto& p : problems) {
      add(p.find("orthonormal") != std::string::npos ? "orthonormality" : "bad transforms", tf, p);
    }
    std::set<std::string> listed;
    if (doc->contains("frames") && (*doc)["frames"].is_array()) {
      for (const auto& f : (*doc)["frames"]) {
        if (!f.is_object() || !f.contains("file_path") || !f["file_path"].is_string()) continue;
        const std::string ref = f["file_path"].get<std::string>();
        listed.insert(fs::path(ref).filename().string());
        if (!fs::is_regular_file(dir / "transforms" / ref)) {
          add("missing image", tf, "frame references missing " + ref);
        }
        // Presence of the depth file itself is covered by the alignment check.
        if (f.contains("depth_file_path") && f["depth_file_path"].is_string()) {
          const std::string depth = fs::path(f["depth_file_path"].get<std::string>()).filename().string();
          const std::string expected = fs::path(ref).filename().string();
          const auto cut = expected.rfind("_rgb.png");
          if (cut == std::string::npos || depth != expected.substr(0, cut) + "_depth.png") {
            add("bad transforms", tf, "depth_file_path " + depth + " does not pair with " + ref);
          }
        }
      }
    }
    for (const auto& [name, ik] : files) {
      if (ik.second == "rgb" && !listed.count(name)) {
        add("untracked image", dir / "sensors" / name, "image has no frame in transforms.json");
      }
    }
    if (!problems.empty()) return;
    for (const auto& f : transforms_from_json(*doc).frames) {
      const fs::path image = dir / "transforms" / f.file_path;
      if (!fs::is_regular_file(image)) continue;
      const auto size = png_size(image);
      if (size && (size->first != f.intrinsics.width || size->second != f.intrinsics.height)) {
        add("intrinsics mismatch", image,
            "image is " + std::to_string(size->first) + "x" + std::to_string(size->second) + " but intrinsics say " +
                std::to_string(f.intrinsics.width) + "x" + std::to_string(f.intrinsics.height));
      }
    }
  }

  void lidar_group(const fs::path& dir) {
    json_file(dir / "camera_info.json");
    const auto files = sensors(dir / "sensors");
    for (const auto& [name, ik] : files) {
      if (ik.second != "lidar") add("unexpected entry", dir / "sensors" / name, "lidar group holds point clouds only");
    }
    const fs::path tf = dir / "transforms" / "transforms.json";
    const auto doc = json_file(tf);
    if (!doc) return;
    if (!doc->contains("frames") || !(*doc)["frames"].is_array()) {
      add("bad transforms", tf, "document has no frames array");
      return;
    }
    std::set<std::string> listed;
    for (std::size_t i = 0; i < (*doc)["frames"].size(); ++i) {
      const Json& f = (*doc)["frames"][i];
      const std::string label = "frame " + std::to_string(i);
      if (!f.is_object() || !f.contains("file_path") || !f["file_path"].is_string()) {
        add("bad transforms", tf, label + ": missing file_path");
        continue;
      }
      const std::string ref = f["file_path"].get<std::string>();
      listed.insert(fs::path(ref).filename().string());
      if (!fs::is_regular_file(dir / "transforms" / ref)) add("missing image", tf, label + " references missing " + ref);
      try {
        Eigen::Matrix3d r;
        for (int a = 0; a < 3; ++a) {
          for (int b = 0; b < 3; ++b) r(a, b) = f.at("transform_matrix").at(a).at(b).get<double>();
        }
        const double err = orthonormality_error(r);
        if (!(err <= kOrthoTolerance)) {
          add("orthonormality", tf, label + " (" + ref + "): rotation not orthonormal (error " + format_double(err) + ")");
        }
      } catch (const std::exception&) {
        add("bad transforms", tf, label + ": transform_matrix is not a 4x4 number array");
      }
    }
    for (const auto& [name, ik] : files) {
      if (!listed.count(name)) add("untracked image", dir / "sensors" / name, "point cloud has no frame");
    }
  }

  std::optional<std::pair<int, int>> png_size(const fs::path& path) {
    try {
      const auto info = read_png_info(path);
      return std::pair{info.width, info.height};
    } catch (const std::exception& e) {
      add("unreadable image", path, e.what());
      return std::nullopt;
    }
  }

 private:
  LayoutReport& report_;
};

}  // namespace

LayoutReport validate_layout(const fs::path& root) {
  if (!fs::is_directory(root)) fail(ErrorCode::kIo, "dataset root " + root.string() + " is not a readable directory");
  LayoutReport report;
  Validator v(report);
  // Allow pointing at a single scene directory as well as the dataset root.
  if (std::regex_match(root.filename().string(), kSceneName) && fs::exists(root / "config.json")) {
    v.scene(root);
    return report;
  }
  for (const auto& town : v.list(root)) {
    if (!town.is_directory()) continue;  // top-level manifests and logs are ignored
    for (const auto& weather : v.list(town.path())) {
      if (!weather.is_directory()) {
        v.add("unexpected entry", weather.path(), "expected a weather directory");
        continue;
      }
      const fs::path vehicle = weather.path() / "vehicle";
      for (const auto& e : v.list(weather.path())) {
        if (e.path() != vehicle) v.add("unexpected entry", e.path(), "expected only vehicle/");
      }
      if (!fs::is_directory(vehicle)) {
        v.add("missing directory", vehicle, "vehicle/ is missing");
        continue;
      }
      for (const auto& scene : v.children(vehicle, kSceneName, "spawn_point_<n>")) v.scene(scene);
    }
  }
  if (report.scenes == 0) v.add("empty dataset", root, "no scenes found", Severity::kWarning);
  return report;
}

}  // namespace egoexo
