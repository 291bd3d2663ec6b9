#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "egoexo/image.hpp"
#include "egoexo/rig_geometry.hpp"
#include "egoexo/scene_config.hpp"

namespace egoexo {

// Class ids follow the CARLA 0.9.15 semantic tags for the classes the mock
// produces.
namespace semantic {
constexpr std::uint16_t kNone = 0;
constexpr std::uint16_t kRoad = 1;
constexpr std::uint16_t kSky = 11;
constexpr std::uint16_t kPedestrian = 12;
constexpr std::uint16_t kVehicle = 14;
}  // namespace semantic

// Pixel-aligned planes for one camera at one tick. depth is planar depth in
// meters along the viewing axis, 0 where nothing was hit.
struct SensorFrame {
  ImageRgb8 rgb;       // 3 channels
  ImageF64 depth;      // 1 channel
  ImageU16 semantic;   // 1 channel
  ImageU16 instance;   // 1 channel, 0 = no actor
  std::optional<ImageF64> flow;  // 3 channels: du, dv, valid (0/1)

  int width() const { return rgb.width(); }
  int height() const { return rgb.height(); }
};

// Points are (x, y, z, w) with world-frame meters and intensity w in [0, 1].
// colors is either empty or has one entry per point.
struct PointCloud {
  std::vector<Eigen::Vector4d> points;
  std::vector<std::array<std::uint8_t, 3>> colors;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_colors() const { return !colors.empty(); }
};

struct BBox3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d extent = Eigen::Vector3d::Ones();  // half sizes
  double yaw = 0.0;
  int actor_id = 0;
  std::uint16_t class_id = semantic::kNone;
};

struct CameraCapture {
  std::string name;
  SensorFrame frame;
  CameraPose pose;  // world frame, OPENGL
  CameraIntrinsics intrinsics;
};

struct LidarCapture {
  PointCloud cloud;  // world frame
  CameraPose pose;   // sensor pose, OPENGL
};

// Cameras of one rig ("nuscenes" or "sphere") mounted on one actor.
struct RigGroupCapture {
  std::string group;
  std::string rig_name;
  std::string rig_version;
  std::vector<double> fov_deg;  // per camera
  std::vector<CameraCapture> cameras;
};

struct ActorCapture {
  int actor_id = 0;
  std::vector<RigGroupCapture> groups;
  std::optional<LidarCapture> lidar;
};

struct CaptureBundle {
  int step = 0;          // capture index within the session, from 0
  double sim_time = 0.0;  // seconds since the world started
  double elapsed = 0.0;   // seconds since the first capture tick began
  std::vector<ActorCapture> actors;
  std::vector<BBox3D> bboxes;
};

enum class ActorKind { kVehicle, kPedestrian };

struct ActorInfo {
  int id = 0;
  ActorKind kind = ActorKind::kVehicle;
  std::string type_id;
  bool is_ego = false;
  bool equipped = false;
  bool parked = false;
  double speed_mps = 0.0;
  BBox3D bbox;
};

class Session {
 public:
  virtual ~Session() = default;

  // Config as realized by the backend, with start_offset_s filled in.
  virtual const SceneConfig& config() const = 0;
  virtual std::vector<ActorInfo> actors() const = 0;
  virtual double sim_time() const = 0;
  // Advances the world by tick_seconds and captures every equipped actor.
  // Throws state-error once the session is closed.
  virtual CaptureBundle tick() = 0;
  // Drops moving non-equipped vehicles; parked ones stay.
  virtual void remove_dynamic_vehicles() = 0;
  virtual void close() = 0;
  virtual bool is_open() const = 0;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  // Throws not-found for an unknown town, spawn-error when placement fails.
  virtual std::unique_ptr<Session> load(const SceneConfig& config) = 0;
};

// Name -> factory. "mock" is registered on first use; other backends add
// themselves through register_backend.
class BackendRegistry {
 public:
  using Factory = std::function<std::unique_ptr<Backend>()>;

  static BackendRegistry& instance();

  void register_backend(const std::string& name, Factory factory);
  std::unique_ptr<Backend> create(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  BackendRegistry();
  std::map<std::string, Factory> factories_;
};

// ---------------------------------------------------------------------------
// Analytic mock world.

struct MockActor {
  int id = 0;
  ActorKind kind = ActorKind::kVehicle;
  std::string type_id;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extent = Eigen::Vector3d::Ones();
  double yaw = 0.0;
  double speed_mps = 0.0;  // along the heading
  bool is_ego = false;
  bool equipped = false;
  bool visible = true;  // false hides the body while keeping its sensors
  std::array<std::uint8_t, 3> color{200, 200, 200};

  Eigen::Vector3d velocity() const;
  Eigen::Matrix3d rotation() const;  // body to world
  BBox3D bbox() const;
  // Body frame: forward-left-up axes at the box center.
  CameraPose body_pose() const;
};

struct RayHit {
  double t = 0.0;     // ray parameter; distance when the direction has unit length
  int actor = -1;     // index into MockWorld::actors(), -1 for the ground
  std::uint16_t class_id = semantic::kNone;
};

struct RenderOptions {
  double max_depth_m = 1000.0;
};

class MockWorld {
 public:
  static constexpr std::array<std::uint8_t, 3> kSkyColor{135, 180, 235};

  MockWorld();

  std::vector<MockActor>& actors() { return actors_; }
  const std::vector<MockActor>& actors() const { return actors_; }
  void add_actor(MockActor actor) { actors_.push_back(std::move(actor)); }

  // Nearest hit with t in (0, t_max]. Boxes that contain the origin are
  // ignored so sensors mounted inside their own vehicle see out.
  std::optional<RayHit> cast(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                             double t_max) const;

  std::array<std::uint8_t, 3> ground_color() const { return ground_color_; }
  std::array<std::uint8_t, 3> color_of(const RayHit& hit) const;

  // Pixel (u, v) samples the ray through its integer coordinates.
  SensorFrame render(const CameraPose& pose, const CameraIntrinsics& intrinsics,
                     const RenderOptions& options = {}) const;

  // Optical flow from this state to the state dt later, for a camera whose
  // pose then is next_pose. Writes into frame.flow.
  void render_flow(SensorFrame& frame, const CameraPose& pose, const CameraPose& next_pose,
                   const CameraIntrinsics& intrinsics, double dt) const;

  PointCloud lidar(const CameraPose& pose, const LidarConfig& config, std::uint64_t seed) const;

  void advance(double dt);

 private:
  std::vector<MockActor> actors_;
  std::array<std::uint8_t, 3> ground_color_;
};

// Towns known to the mock and their procedural spawn points.
std::vector<std::string> mock_towns();
struct SpawnPoint {
  Eigen::Vector3d location;  // ground contact point
  double yaw = 0.0;
};
std::vector<SpawnPoint> mock_spawn_points(const std::string& town);

// Builds the populated world for config. Pure function of the config.
MockWorld build_mock_world(const SceneConfig& config);

class MockBackend : public Backend {
 public:
  std::string name() const override { return "mock"; }
  std::unique_ptr<Session> load(const SceneConfig& config) override;
};

// Session over an explicit world, for tests that need a hand-built scene.
std::unique_ptr<Session> make_mock_session(const SceneConfig& config, MockWorld world);

// Rig mounted on an actor, posed in the world.
std::vector<CameraCapture> place_rig(const CameraRig& rig, const CameraPose& body_pose);

}  // namespace egoexo
