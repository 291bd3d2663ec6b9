#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <doctest.h>

#include "egoexo/dataset_store.hpp"
#include "egoexo/image_io.hpp"
#include "egoexo/pose_io.hpp"
#include "test_support.hpp"

namespace egoexo {
namespace {

namespace fs = std::filesystem;
using testing::error_code_of;
using testing::TempDir;

SceneConfig tiny_scene() {
  SceneConfig c;
  c.seed = 11;
  c.n_vehicles = 3;
  c.n_pedestrians = 2;
  c.ego_rig.width = 32;
  c.ego_rig.height = 24;
  c.exo_rig.params.n = 100;
  c.exo_rig.params.width = 16;
  c.exo_rig.params.height = 12;
  c.lidar.points_per_tick = 512;
  return c;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).generic_string()] = ss.str();
  }
  return out;
}

std::size_t count_files(const fs::path& dir, const std::string& suffix) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    n += name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  }
  return n;
}

fs::path ego_actor_dir(const fs::path& scene) { return scene / "step_0" / "100"; }

// Mock backend whose sessions fail on a chosen tick.
class FailingBackend : public Backend {
 public:
  explicit FailingBackend(int fail_on_tick) : fail_on_(fail_on_tick) {}
  std::string name() const override { return "failing"; }
  std::unique_ptr<Session> load(const SceneConfig& config) override {
    struct Wrapped : Session {
      std::unique_ptr<Session> inner;
      int fail_on = 0;
      int ticks = 0;
      const SceneConfig& config() const override { return inner->config(); }
      std::vector<ActorInfo> actors() const override { return inner->actors(); }
      double sim_time() const override { return inner->sim_time(); }
      CaptureBundle tick() override {
        if (++ticks == fail_on) fail(ErrorCode::kIo, "disk full");
        return inner->tick();
      }
      void remove_dynamic_vehicles() override { inner->remove_dynamic_vehicles(); }
      void close() override { inner->close(); }
      bool is_open() const override { return inner->is_open(); }
    };
    auto s = std::make_unique<Wrapped>();
    s->inner = MockBackend().load(config);
    s->fail_on = fail_on_;
    return s;
  }

 private:
  int fail_on_;
};

}  // namespace

TEST_CASE("depth quantization error stays within half a millimeter") {
  SeededRng rng(5);
  ImageF64 depth(50, 40);
  for (auto& d : depth.data()) d = rng.uniform(0.001, 32.7);
  depth.at(0, 0) = 0.0;
  const ImageF64 back = decode_depth_mm(encode_depth_mm(depth));
  CHECK(back.at(0, 0) == 0.0);
  double worst = 0.0;
  for (std::size_t i = 1; i < depth.data().size(); ++i) {
    worst = std::max(worst, std::abs(back.data()[i] - depth.data()[i]));
  }
  CHECK(worst <= 0.5e-3 + 1e-12);

  TempDir tmp;
  write_png_gray16(tmp / "d.png", encode_depth_mm(depth));
  CHECK(decode_depth_mm(read_png_gray16(tmp / "d.png")) == back);
}

TEST_CASE("static scene with one equipped vehicle writes 7 ego and 100 exo views") {
  TempDir tmp;
  MockBackend backend;
  const auto dirs = generate_scene(backend, tiny_scene(), tmp.path(), false);
  REQUIRE(dirs.size() == 1);
  CHECK(dirs[0] == tmp.path() / "Town01" / "ClearNoon" / "vehicle" / "spawn_point_0");
  const fs::path actor = ego_actor_dir(dirs[0]);
  for (const char* kind : {"_rgb.png", "_depth.png", "_semantic_seg.png", "_instance_seg.png"}) {
    CHECK(count_files(actor / "nuscenes" / "sensors", kind) == 7);
    CHECK(count_files(actor / "sphere" / "sensors", kind) == 100);
  }
  CHECK(count_files(actor / "nuscenes" / "sensors", "_lidar.ply") == 7);
  CHECK(fs::is_regular_file(actor / "nuscenes_lidar" / "sensors" / "0_lidar.ply"));
  CHECK(read_transforms(actor / "sphere" / "transforms" / "transforms.json").frames.size() == 100);

  // One equipped actor: only the ego has a directory.
  std::size_t actor_dirs = 0;
  for (const auto& e : fs::directory_iterator(dirs[0] / "step_0")) actor_dirs += e.is_directory();
  CHECK(actor_dirs == 1);

  const auto report = validate_layout(tmp.path());
  for (const auto& v : report.violations) MESSAGE(v.kind << " " << v.path << " " << v.message);
  CHECK(report.violations.empty());
  CHECK(report.scenes == 1);
  CHECK(report.images == 107);
}

TEST_CASE("scene metadata files carry boxes, vehicle types and elapsed time") {
  TempDir tmp;
  MockBackend backend;
  SceneConfig c = tiny_scene();
  c.exo_rig.params.n = 4;
  c.timesteps = 3;
  const fs::path scene = generate_scene(backend, c, tmp.path(), false).at(0);

  const Json vehicles = read_json_file(scene / "vehicles.json");
  CHECK(vehicles["vehicles"].size() == 4);  // ego + 3
  CHECK(vehicles["pedestrians"].size() == 2);
  CHECK(vehicles["vehicles"][0]["is_ego"] == true);
  CHECK(!vehicles["vehicle_types"].empty());

  const Json config = read_json_file(scene / "config.json");
  REQUIRE(config.contains("start_offset_s"));
  const double offset = config["start_offset_s"].get<double>();
  CHECK(offset >= 1.0);
  CHECK(offset <= 3.0);
  CHECK(config["weather"] == "ClearNoon");

  for (int j = 0; j < 3; ++j) {
    const fs::path step = scene / ("step_" + std::to_string(j));
    const Json elapsed = read_json_file(step / "elapsed_time.json");
    CHECK(elapsed["step"] == j);
    CHECK(elapsed["elapsed_s"].get<double>() == doctest::Approx(0.1 * (j + 1)));
    const Json boxes = read_json_file(step / "bboxes.json");
    CHECK(boxes["boxes"].size() == 6);
  }
  const Json info = read_json_file(ego_actor_dir(scene) / "nuscenes" / "camera_info.json");
  CHECK(info["cameras"].size() == 7);
  CHECK(info["encodings"]["depth"]["unit"] == "millimeter");
  CHECK(info["rig_version"].is_string());
  CHECK(validate_layout(tmp.path()).violations.empty());
}

TEST_CASE("snapshot of the defaults records ClearNoon and the drawn offset") {
  TempDir tmp;
  SceneConfig c;
  snapshot_config(c, tmp / "config.json");
  CHECK(read_json_file(tmp / "config.json")["weather"] == "ClearNoon");

  auto session = MockBackend().load(tiny_scene());
  snapshot_config(session->config(), tmp / "realized.json");
  const Json j = read_json_file(tmp / "realized.json");
  REQUIRE(j.contains("start_offset_s"));
  CHECK(j["start_offset_s"].get<double>() == *session->config().start_offset_s);
}

TEST_CASE("regenerating from the snapshot reproduces identical files") {
  TempDir a;
  TempDir b;
  MockBackend backend;
  SceneConfig c = tiny_scene();
  c.exo_rig.params.n = 6;
  c.timesteps = 2;
  c.optical_flow = true;
  const fs::path scene = generate_scene(backend, c, a.path(), false).at(0);
  const SceneConfig again = scene_config_from_json(read_json_file(scene / "config.json"));
  generate_scene(backend, again, b.path(), false);
  const auto ta = read_tree(a.path());
  const auto tb = read_tree(b.path());
  CHECK(ta.size() == tb.size());
  for (const auto& [name, bytes] : ta) {
    const auto it = tb.find(name);
    CHECK_MESSAGE((it != tb.end() && it->second == bytes), name);
  }
  CHECK(ta.count("Town01/ClearNoon/vehicle/spawn_point_0/step_1/100/sphere/sensors/5_optical_flow.png") == 1);
  CHECK(validate_layout(a.path()).violations.empty());
}

TEST_CASE("with and without ego are written as sibling captures") {
  TempDir tmp;
  MockBackend backend;
  SceneConfig c = tiny_scene();
  c.exo_rig.params.n = 8;
  c.capture_without_ego = true;
  const auto dirs = generate_scene(backend, c, tmp.path(), false);
  REQUIRE(dirs.size() == 2);
  CHECK(dirs[0].filename() == "spawn_point_0_with_ego");
  CHECK(dirs[1].filename() == "spawn_point_0_no_ego");
  auto ego_pixels = [](const fs::path& scene) {
    std::size_t n = 0;
    for (int i = 0; i < 8; ++i) {
      const auto inst =
          read_png_gray16(ego_actor_dir(scene) / "sphere" / "sensors" / sensor_file_name(i, SensorKind::kInstance));
      for (auto id : inst.data()) n += id == 100;
    }
    return n;
  };
  CHECK(ego_pixels(dirs[0]) > 0);
  CHECK(ego_pixels(dirs[1]) == 0);
  CHECK(read_json_file(dirs[1] / "config.json")["include_ego_vehicle"] == false);
  const auto report = validate_layout(tmp.path());
  CHECK(report.violations.empty());
  CHECK(report.scenes == 2);
}

TEST_CASE("existing scenes are not overwritten without permission") {
  TempDir tmp;
  MockBackend backend;
  SceneConfig c = tiny_scene();
  c.exo_rig.params.n = 2;
  const fs::path scene = generate_scene(backend, c, tmp.path(), false).at(0);
  CHECK(error_code_of([&] { generate_scene(backend, c, tmp.path(), false); }) == ErrorCode::kState);

  c.seed = 12;
  generate_scene(backend, c, tmp.path(), true);
  CHECK(read_json_file(scene / "config.json")["seed"] == 12);
  for (const auto& e : fs::directory_iterator(scene.parent_path())) {
    CHECK(e.path().filename().string().find("staging") == std::string::npos);
  }
}

TEST_CASE("a failed capture leaves neither a scene nor a staging directory") {
  TempDir tmp;
  FailingBackend backend(2);
  SceneConfig c = tiny_scene();
  c.exo_rig.params.n = 2;
  c.timesteps = 3;
  CHECK(error_code_of([&] { generate_scene(backend, c, tmp.path(), false); }) == ErrorCode::kIo);
  const fs::path vehicle = tmp.path() / "Town01" / "ClearNoon" / "vehicle";
  CHECK(!fs::exists(vehicle / "spawn_point_0"));
  CHECK(fs::is_empty(vehicle));
}

TEST_CASE("validate_layout reports each injected fault once") {
  TempDir tmp;
  MockBackend backend;
  SceneConfig c = tiny_scene();
  c.exo_rig.params.n = 6;
  const fs::path scene = generate_scene(backend, c, tmp.path(), false).at(0);
  const fs::path sphere = ego_actor_dir(scene) / "sphere";
  REQUIRE(validate_layout(tmp.path()).violations.empty());

  SUBCASE("missing depth png") {
    fs::remove(sphere / "sensors" / "3_depth.png");
    const auto r = validate_layout(tmp.path());
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == "missing aligned sensor");
    CHECK(r.violations[0].message.find("camera 3") != std::string::npos);
    CHECK_FALSE(r.ok());
  }
  SUBCASE("corrupted rotation") {
    Json doc = read_json_file(sphere / "transforms" / "transforms.json");
    doc["frames"][4]["transform_matrix"][0][0] = 3.0;
    write_json_file(sphere / "transforms" / "transforms.json", doc);
    const auto r = validate_layout(tmp.path());
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == "orthonormality");
    CHECK(r.violations[0].message.find("frame 4") != std::string::npos);
    CHECK(r.violations[0].message.find("4_rgb.png") != std::string::npos);
  }
  SUBCASE("corrupted lidar rotation") {
    const fs::path tf = ego_actor_dir(scene) / "nuscenes_lidar" / "transforms" / "transforms.json";
    Json doc = read_json_file(tf);
    doc["frames"][0]["transform_matrix"][1][1] = 0.2;
    write_json_file(tf, doc);
    const auto r = validate_layout(tmp.path());
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == "orthonormality");
  }
  SUBCASE("image not listed in transforms") {
    fs::copy_file(sphere / "sensors" / "0_rgb.png", sphere / "sensors" / "9_rgb.png");
    for (const char* k : {"depth", "semantic_seg", "instance_seg"}) {
      fs::copy_file(sphere / "sensors" / (std::string("0_") + k + ".png"),
                    sphere / "sensors" / (std::string("9_") + k + ".png"));
    }
    const auto r = validate_layout(tmp.path());
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == "untracked image");
  }
  SUBCASE("image size disagrees with intrinsics") {
    const fs::path s = sphere / "sensors";
    write_png_rgb8(s / "2_rgb.png", ImageRgb8(20, 12, 3));
    const auto r = validate_layout(tmp.path());
    CHECK(r.count("intrinsics mismatch") == 1);
    CHECK(r.count("size mismatch") == 3);  // depth, semantic and instance no longer match rgb
  }
  SUBCASE("badly named sensor file") {
    std::ofstream(sphere / "sensors" / "0_normals.png") << "x";
    const auto r = validate_layout(tmp.path());
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == "bad sensor name");
  }
  SUBCASE("leftover staging directory") {
    fs::create_directories(scene.parent_path() / ".spawn_point_1.staging.1.0");
    const auto r = validate_layout(tmp.path());
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == "leftover staging");
  }
}

TEST_CASE("validate_layout on a missing root is an I/O error") {
  TempDir tmp;
  CHECK(error_code_of([&] { validate_layout(tmp / "nope"); }) == ErrorCode::kIo);
  const auto r = validate_layout(tmp.path());
  CHECK(r.ok());
  CHECK(r.count("empty dataset") == 1);
}

TEST_CASE("sensor file names") {
  CHECK(sensor_file_name(0, SensorKind::kDepth) == "0_depth.png");
  CHECK(sensor_file_name(12, SensorKind::kSemantic) == "12_semantic_seg.png");
  CHECK(sensor_file_name(3, SensorKind::kInstance) == "3_instance_seg.png");
  CHECK(sensor_file_name(1, SensorKind::kFlow) == "1_optical_flow.png");
  CHECK(sensor_file_name(0, SensorKind::kLidar) == "0_lidar.ply");
}

}  // namespace egoexo
