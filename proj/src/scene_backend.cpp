#include "egoexo/scene_backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>

#include "egoexo/carla_adapter.hpp"
#include "egoexo/error.hpp"
#include "egoexo/rng.hpp"

namespace egoexo {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kFirstActorId = 100;

struct VehicleType {
  const char* type_id;
  double half_length;
  double half_width;
  bool large;
};

// Body half-height is shared so every vehicle center sits at the same height.
constexpr double kVehicleHalfHeight = 0.75;
constexpr VehicleType kVehicleTypes[] = {
    {"vehicle.tesla.model3", 2.40, 1.05, false},
    {"vehicle.audi.a2", 1.85, 0.90, false},
    {"vehicle.toyota.prius", 2.25, 1.00, false},
    {"vehicle.mini.cooper_s", 1.90, 0.95, false},
    {"vehicle.lincoln.mkz_2020", 2.45, 1.05, false},
    {"vehicle.nissan.patrol", 2.30, 1.00, false},
    {"vehicle.mercedes.coupe_2020", 2.35, 1.00, false},
    {"vehicle.seat.leon", 2.10, 0.95, false},
    {"vehicle.carlamotors.carlacola", 2.60, 1.30, true},
    {"vehicle.carlamotors.firetruck", 4.40, 1.40, true},
    {"vehicle.mitsubishi.fusorosa", 5.10, 1.50, true},
};
constexpr int kEgoType = 0;

const Eigen::Vector3d kPedestrianHalf(0.3, 0.3, 0.9);

// OPENGL camera axes in a forward-left-up sensor frame.
Eigen::Matrix3d flu_to_gl_camera() {
  Eigen::Matrix3d b;
  b << 0.0, 0.0, -1.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0;
  return b;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Precomputed box for slab tests.
struct BoxGeom {
  int index = -1;
  Eigen::Matrix3d rotation_t;  // world to local
  Eigen::Vector3d center;
  Eigen::Vector3d half;
  std::uint16_t class_id = semantic::kNone;
};

std::vector<BoxGeom> box_geometry(const std::vector<MockActor>& actors) {
  std::vector<BoxGeom> boxes;
  boxes.reserve(actors.size());
  for (std::size_t i = 0; i < actors.size(); ++i) {
    const auto& a = actors[i];
    if (!a.visible) continue;
    boxes.push_back({static_cast<int>(i), a.rotation().transpose(), a.center, a.half_extent,
                     a.kind == ActorKind::kVehicle ? semantic::kVehicle : semantic::kPedestrian});
  }
  return boxes;
}

// Entry parameter of the ray into the box, if the box is entered in front of
// the origin.
std::optional<double> slab_entry(const BoxGeom& box, const Eigen::Vector3d& origin,
                                 const Eigen::Vector3d& direction) {
  const Eigen::Vector3d o = box.rotation_t * (origin - box.center);
  const Eigen::Vector3d d = box.rotation_t * direction;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (d[k] == 0.0) {
      if (std::abs(o[k]) > box.half[k]) return std::nullopt;
      continue;
    }
    double t1 = (-box.half[k] - o[k]) / d[k];
    double t2 = (box.half[k] - o[k]) / d[k];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_near <= 0.0) return std::nullopt;
  return t_near;
}

template <typename Indices>
std::optional<RayHit> cast_boxes(const std::vector<BoxGeom>& boxes, const Indices& candidates,
                                 const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                                 double t_max) {
  std::optional<RayHit> best;
  if (direction.z() < 0.0 && origin.z() > 0.0) {
    const double t = -origin.z() / direction.z();
    if (t <= t_max) best = RayHit{t, -1, semantic::kRoad};
  }
  for (int c : candidates) {
    const BoxGeom& box = boxes[c];
    const auto t = slab_entry(box, origin, direction);
    if (!t || *t > t_max) continue;
    if (!best || *t < best->t) best = RayHit{*t, box.index, box.class_id};
  }
  return best;
}

struct PixelRect {
  int u0 = 0, u1 = -1, v0 = 0, v1 = -1;
  bool contains(int u, int v) const { return u >= u0 && u <= u1 && v >= v0 && v <= v1; }
};

// Conservative screen-space bounds of a box; empty when the box is behind.
PixelRect screen_bounds(const BoxGeom& box, const CameraPose& pose, const CameraIntrinsics& k) {
  const Eigen::Matrix3d local_to_world = box.rotation_t.transpose();
  double umin = std::numeric_limits<double>::infinity(), umax = -umin;
  double vmin = umin, vmax = -umin;
  int behind = 0;
  bool straddles = false;
  for (int corner = 0; corner < 8; ++corner) {
    const Eigen::Vector3d s((corner & 1) ? 1.0 : -1.0, (corner & 2) ? 1.0 : -1.0,
                            (corner & 4) ? 1.0 : -1.0);
    const Eigen::Vector3d p = pose.to_camera(box.center + local_to_world * box.half.cwiseProduct(s));
    if (p.z() >= -1e-6) {
      ++behind;
      straddles = true;
      continue;
    }
    const double u = k.cx + k.fx * p.x() / -p.z();
    const double v = k.cy - k.fy * p.y() / -p.z();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  if (behind == 8) return {};
  if (straddles) return {0, k.width - 1, 0, k.height - 1};
  PixelRect r;
  r.u0 = std::max(0, static_cast<int>(std::floor(umin)) - 1);
  r.u1 = std::min(k.width - 1, static_cast<int>(std::ceil(umax)) + 1);
  r.v0 = std::max(0, static_cast<int>(std::floor(vmin)) - 1);
  r.v1 = std::min(k.height - 1, static_cast<int>(std::ceil(vmax)) + 1);
  return r;
}

// 2D oriented rectangle overlap by separating axes.
bool footprints_overlap(const MockActor& a, const MockActor& b, double margin) {
  const auto corners = [margin](const MockActor& m) {
    const double c = std::cos(m.yaw), s = std::sin(m.yaw);
    const double hx = m.half_extent.x() + margin, hy = m.half_extent.y() + margin;
    std::array<Eigen::Vector2d, 4> out;
    int i = 0;
    for (double sx : {-1.0, 1.0}) {
      for (double sy : {-1.0, 1.0}) {
        out[i++] = Eigen::Vector2d(m.center.x() + c * sx * hx - s * sy * hy,
                                   m.center.y() + s * sx * hx + c * sy * hy);
      }
    }
    return out;
  };
  const auto ca = corners(a), cb = corners(b);
  for (double yaw : {a.yaw, a.yaw + kPi / 2, b.yaw, b.yaw + kPi / 2}) {
    const Eigen::Vector2d axis(std::cos(yaw), std::sin(yaw));
    double amin = std::numeric_limits<double>::infinity(), amax = -amin, bmin = amin, bmax = -amin;
    for (const auto& p : ca) {
      amin = std::min(amin, axis.dot(p));
      amax = std::max(amax, axis.dot(p));
    }
    for (const auto& p : cb) {
      bmin = std::min(bmin, axis.dot(p));
      bmax = std::max(bmax, axis.dot(p));
    }
    if (amax < bmin || bmax < amin) return false;
  }
  return true;
}

std::array<std::uint8_t, 3> actor_color(SeededRng& rng) {
  std::array<std::uint8_t, 3> c;
  for (auto& v : c) v = static_cast<std::uint8_t>(40 + rng.index(191));
  return c;
}

CameraPose translated(const CameraPose& pose, const Eigen::Vector3d& offset) {
  return CameraPose(pose.rotation(), pose.translation() + offset, pose.convention());
}

int warm_ticks(double offset_s, double tick_s) {
  return static_cast<int>(std::llround(offset_s / tick_s));
}

class MockSession : public Session {
 public:
  MockSession(SceneConfig config, MockWorld world)
      : config_(std::move(config)), world_(std::move(world)) {
    config_.validate();
    if (!config_.start_offset_s) {
      SeededRng rng(mix_seed(config_.seed, 4));
      config_.start_offset_s =
          rng.uniform(config_.start_offset_range_s[0], config_.start_offset_range_s[1]);
    }
    for (auto& a : world_.actors()) {
      if (a.is_ego && !config_.include_ego_vehicle) a.visible = false;
    }
    ego_rig_ = config_.ego_rig.build();
    exo_rig_ = config_.exo_rig.build();
    initial_.reserve(world_.actors().size());
    for (const auto& a : world_.actors()) initial_.push_back(a.center);
    ticks_ = warm_ticks(*config_.start_offset_s, config_.tick_seconds);
    warm_ = ticks_;
    apply_time();
  }

  const SceneConfig& config() const override { return config_; }

  std::vector<ActorInfo> actors() const override {
    std::vector<ActorInfo> out;
    for (const auto& a : world_.actors()) {
      if (!a.visible) continue;
      out.push_back({a.id, a.kind, a.type_id, a.is_ego, a.equipped, a.speed_mps == 0.0, a.speed_mps,
                     a.bbox()});
    }
    return out;
  }

  double sim_time() const override { return ticks_ * config_.tick_seconds; }

  CaptureBundle tick() override {
    if (!open_) fail(ErrorCode::kState, "session is closed");
    ++ticks_;
    apply_time();
    const double dt = config_.tick_seconds;

    CaptureBundle bundle;
    bundle.step = ticks_ - warm_ - 1;
    bundle.sim_time = ticks_ * dt;
    bundle.elapsed = (ticks_ - warm_) * dt;
    RenderOptions options;
    for (const auto& a : world_.actors()) {
      if (a.visible) bundle.bboxes.push_back(a.bbox());
    }
    for (const auto& a : world_.actors()) {
      if (!a.equipped) continue;
      ActorCapture ac;
      ac.actor_id = a.id;
      const CameraPose body = a.body_pose();
      const Eigen::Vector3d motion = a.velocity() * dt;
      for (const auto& [group, rig] : {std::pair<const char*, const CameraRig*>{"nuscenes", &ego_rig_},
                                       std::pair<const char*, const CameraRig*>{"sphere", &exo_rig_}}) {
        RigGroupCapture g;
        g.group = group;
        g.rig_name = rig->name();
        g.rig_version = rig->version();
        g.cameras = place_rig(*rig, body);
        for (std::size_t i = 0; i < g.cameras.size(); ++i) {
          auto& cam = g.cameras[i];
          g.fov_deg.push_back((*rig)[i].fov_deg);
          cam.frame = world_.render(cam.pose, cam.intrinsics, options);
          if (config_.optical_flow) {
            world_.render_flow(cam.frame, cam.pose, translated(cam.pose, motion), cam.intrinsics, dt);
          }
        }
        ac.groups.push_back(std::move(g));
      }
      if (config_.lidar.enabled) {
        const CameraPose mount(flu_to_gl_camera(), config_.lidar.mount_m, Convention::kOpenGL);
        LidarCapture lc;
        lc.pose = body.compose(mount);
        lc.cloud = world_.lidar(lc.pose, config_.lidar,
                                mix_seed(mix_seed(config_.seed, 5), static_cast<std::uint64_t>(ticks_) * 65536 + a.id));
        ac.lidar = std::move(lc);
      }
      bundle.actors.push_back(std::move(ac));
    }
    return bundle;
  }

  void remove_dynamic_vehicles() override {
    if (!open_) fail(ErrorCode::kState, "session is closed");
    auto& actors = world_.actors();
    std::vector<MockActor> kept;
    std::vector<Eigen::Vector3d> kept_initial;
    for (std::size_t i = 0; i < actors.size(); ++i) {
      const auto& a = actors[i];
      if (a.kind == ActorKind::kVehicle && a.speed_mps != 0.0 && !a.equipped) continue;
      kept.push_back(a);
      kept_initial.push_back(initial_[i]);
    }
    actors = std::move(kept);
    initial_ = std::move(kept_initial);
  }

  void close() override { open_ = false; }
  bool is_open() const override { return open_; }

 private:
  void apply_time() {
    const double t = ticks_ * config_.tick_seconds;
    auto& actors = world_.actors();
    for (std::size_t i = 0; i < actors.size(); ++i) actors[i].center = initial_[i] + actors[i].velocity() * t;
  }

  SceneConfig config_;
  MockWorld world_;
  CameraRig ego_rig_;
  CameraRig exo_rig_;
  std::vector<Eigen::Vector3d> initial_;
  int ticks_ = 0;
  int warm_ = 0;
  bool open_ = true;
};

}  // namespace

// --- registry ---------------------------------------------------------------

BackendRegistry::BackendRegistry() {
  factories_["mock"] = [] { return std::make_unique<MockBackend>(); };
  factories_["carla"] = [] { return make_carla_backend(); };
}

BackendRegistry& BackendRegistry::instance() {
  static BackendRegistry registry;
  return registry;
}

void BackendRegistry::register_backend(const std::string& name, Factory factory) {
  factories_[name] = std::move(factory);
}

std::unique_ptr<Backend> BackendRegistry::create(const std::string& name) const {
  const auto it = factories_.find(name);
  if (it == factories_.end()) fail(ErrorCode::kNotFound, "unknown backend '" + name + "'");
  return it->second();
}

std::vector<std::string> BackendRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : factories_) out.push_back(name);
  return out;
}

// --- actors -----------------------------------------------------------------

Eigen::Matrix3d MockActor::rotation() const {
  return Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

Eigen::Vector3d MockActor::velocity() const {
  return Eigen::Vector3d(std::cos(yaw), std::sin(yaw), 0.0) * speed_mps;
}

BBox3D MockActor::bbox() const {
  return {center, half_extent, yaw, id,
          kind == ActorKind::kVehicle ? semantic::kVehicle : semantic::kPedestrian};
}

CameraPose MockActor::body_pose() const { return CameraPose(rotation(), center, Convention::kOpenGL); }

// --- world ------------------------------------------------------------------

MockWorld::MockWorld() {
  const Eigen::Vector3d sun = Eigen::Vector3d(-0.3, 0.2, 0.93).normalized();
  const double shade = 0.35 + 0.65 * std::max(0.0, sun.z());
  ground_color_ = {to_u8(118 * shade), to_u8(116 * shade), to_u8(108 * shade)};
}

std::optional<RayHit> MockWorld::cast(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                                      double t_max) const {
  const auto boxes = box_geometry(actors_);
  std::vector<int> all(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) all[i] = static_cast<int>(i);
  return cast_boxes(boxes, all, origin, direction, t_max);
}

std::array<std::uint8_t, 3> MockWorld::color_of(const RayHit& hit) const {
  return hit.actor < 0 ? ground_color_ : actors_[hit.actor].color;
}

SensorFrame MockWorld::render(const CameraPose& pose, const CameraIntrinsics& k,
                              const RenderOptions& options) const {
  if (pose.convention() != Convention::kOpenGL) {
    fail(ErrorCode::kConvention, "mock render expects an OPENGL pose");
  }
  k.validate();
  SensorFrame frame;
  frame.rgb = ImageRgb8(k.width, k.height, 3);
  frame.depth = ImageF64(k.width, k.height, 1, 0.0);
  frame.semantic = ImageU16(k.width, k.height, 1, semantic::kSky);
  frame.instance = ImageU16(k.width, k.height, 1, 0);

  const auto boxes = box_geometry(actors_);
  std::vector<PixelRect> rects;
  rects.reserve(boxes.size());
  for (const auto& b : boxes) rects.push_back(screen_bounds(b, pose, k));

  const Eigen::Matrix3d& r = pose.rotation();
  const Eigen::Vector3d& origin = pose.translation();
  std::vector<int> row_candidates, candidates;
  for (int v = 0; v < k.height; ++v) {
    row_candidates.clear();
    for (std::size_t i = 0; i < rects.size(); ++i) {
      if (v >= rects[i].v0 && v <= rects[i].v1) row_candidates.push_back(static_cast<int>(i));
    }
    for (int u = 0; u < k.width; ++u) {
      candidates.clear();
      for (int c : row_candidates) {
        if (rects[c].contains(u, v)) candidates.push_back(c);
      }
      const Eigen::Vector3d d_cam((u - k.cx) / k.fx, -(v - k.cy) / k.fy, -1.0);
      const Eigen::Vector3d dir = r * d_cam;
      const auto hit = cast_boxes(boxes, candidates, origin, dir, options.max_depth_m);
      const auto color = hit ? color_of(*hit) : kSkyColor;
      for (int ch = 0; ch < 3; ++ch) frame.rgb.at(u, v, ch) = color[ch];
      if (!hit) continue;
      frame.depth.at(u, v) = hit->t;
      frame.semantic.at(u, v) = hit->class_id;
      frame.instance.at(u, v) = hit->actor < 0 ? 0 : static_cast<std::uint16_t>(actors_[hit->actor].id);
    }
  }
  return frame;
}

void MockWorld::render_flow(SensorFrame& frame, const CameraPose& pose, const CameraPose& next_pose,
                            const CameraIntrinsics& k, double dt) const {
  ImageF64 flow(k.width, k.height, 3, 0.0);
  std::map<int, Eigen::Vector3d> velocity;
  for (const auto& a : actors_) velocity[a.id] = a.velocity();
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const double d = frame.depth.at(u, v);
      if (d <= 0.0) continue;
      Eigen::Vector3d x = pose.to_world(Eigen::Vector3d((u - k.cx) * d / k.fx, -(v - k.cy) * d / k.fy, -d));
      const int id = frame.instance.at(u, v);
      if (id != 0) {
        const auto it = velocity.find(id);
        if (it != velocity.end()) x += it->second * dt;
      }
      const Eigen::Vector3d p = next_pose.to_camera(x);
      if (p.z() >= 0.0) continue;
      flow.at(u, v, 0) = k.cx + k.fx * p.x() / -p.z() - u;
      flow.at(u, v, 1) = k.cy - k.fy * p.y() / -p.z() - v;
      flow.at(u, v, 2) = 1.0;
    }
  }
  frame.flow = std::move(flow);
}

PointCloud MockWorld::lidar(const CameraPose& pose, const LidarConfig& config, std::uint64_t seed) const {
  if (!(config.range_m > 0.0)) fail(ErrorCode::kInvalidArgument, "lidar range must be positive");
  PointCloud cloud;
  if (config.channels < 1 || config.points_per_tick <= 0) return cloud;
  const auto boxes = box_geometry(actors_);
  std::vector<int> all(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) all[i] = static_cast<int>(i);

  // Sensor frame axes: forward = -Z, left = -X, up = +Y of the OPENGL pose.
  const Eigen::Matrix3d& r = pose.rotation();
  const Eigen::Vector3d forward = -r.col(2), left = -r.col(0), up = r.col(1);
  SeededRng rng(seed);
  const int per_channel = config.points_per_tick / config.channels;
  const int extra = config.points_per_tick % config.channels;
  for (int c = 0; c < config.channels; ++c) {
    const double elevation_deg =
        config.channels == 1 ? config.lower_fov_deg
                             : config.lower_fov_deg + (config.upper_fov_deg - config.lower_fov_deg) * c /
                                                          (config.channels - 1);
    const double e = elevation_deg * kPi / 180.0;
    const int count = per_channel + (c < extra ? 1 : 0);
    for (int i = 0; i < count; ++i) {
      const double a = rng.uniform(0.0, 2.0 * kPi);
      const Eigen::Vector3d dir =
          (forward * (std::cos(e) * std::cos(a)) + left * (std::cos(e) * std::sin(a)) + up * std::sin(e))
              .normalized();
      const auto hit = cast_boxes(boxes, all, pose.translation(), dir, config.range_m);
      if (!hit) continue;
      const Eigen::Vector3d p = pose.translation() + hit->t * dir;
      double w = config.intensity_ground;
      if (hit->class_id == semantic::kVehicle) w = config.intensity_vehicle;
      if (hit->class_id == semantic::kPedestrian) w = config.intensity_pedestrian;
      cloud.points.emplace_back(p.x(), p.y(), p.z(), w);
    }
  }
  return cloud;
}

void MockWorld::advance(double dt) {
  for (auto& a : actors_) a.center += a.velocity() * dt;
}

// --- towns and spawning -----------------------------------------------------

std::vector<std::string> mock_towns() {
  return {"Town01", "Town02", "Town03", "Town04", "Town05", "Town06", "Town07", "Town10HD"};
}

std::vector<SpawnPoint> mock_spawn_points(const std::string& town) {
  static const std::map<std::string, int> counts = {
      {"Town01", 255}, {"Town02", 101}, {"Town03", 265}, {"Town04", 372},
      {"Town05", 302}, {"Town06", 436}, {"Town07", 116}, {"Town10HD", 155}};
  const auto it = counts.find(town);
  if (it == counts.end()) fail(ErrorCode::kNotFound, "unknown town '" + town + "'");
  SeededRng rng(mix_seed(fnv1a(town), 0));
  std::vector<SpawnPoint> points;
  points.reserve(it->second);
  for (int i = 0; i < it->second; ++i) {
    SpawnPoint p;
    p.location = Eigen::Vector3d(rng.uniform(-150.0, 150.0), rng.uniform(-150.0, 150.0), 0.0);
    // Road-aligned headings.
    p.yaw = static_cast<double>(rng.index(4)) * kPi / 2 - kPi / 2;
    points.push_back(p);
  }
  return points;
}

MockWorld build_mock_world(const SceneConfig& config) {
  config.validate();
  const auto spawn_points = mock_spawn_points(config.town);
  if (config.spawn_point >= static_cast<int>(spawn_points.size())) {
    fail(ErrorCode::kNotFound, "spawn point " + std::to_string(config.spawn_point) + " out of range for " +
                                   config.town + " (" + std::to_string(spawn_points.size()) + " points)");
  }
  const SpawnPoint& sp = spawn_points[config.spawn_point];
  MockWorld world;
  SeededRng color_rng(mix_seed(config.seed, 3));
  int next_id = kFirstActorId;

  MockActor ego;
  ego.id = next_id++;
  ego.type_id = kVehicleTypes[kEgoType].type_id;
  ego.half_extent = {kVehicleTypes[kEgoType].half_length, kVehicleTypes[kEgoType].half_width, kVehicleHalfHeight};
  ego.center = sp.location + Eigen::Vector3d(0.0, 0.0, kVehicleHalfHeight);
  ego.yaw = sp.yaw;
  ego.is_ego = true;
  ego.equipped = true;
  ego.color = actor_color(color_rng);
  SeededRng speed_rng(mix_seed(config.seed, 6));
  ego.speed_mps = speed_rng.uniform(config.vehicle_speed_range_mps[0], config.vehicle_speed_range_mps[1]);
  world.add_actor(ego);

  std::vector<int> pool;
  for (int i = 0; i < static_cast<int>(std::size(kVehicleTypes)); ++i) {
    if (!(config.exclude_large_vehicles && kVehicleTypes[i].large)) pool.push_back(i);
  }

  const auto place = [&](MockActor actor, SeededRng& rng, double r_min, double r_max, int index,
                         bool random_heading) {
    constexpr int kAttempts = 200;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      const double r = rng.uniform(r_min, r_max);
      const double theta = rng.uniform(0.0, 2.0 * kPi);
      actor.center = Eigen::Vector3d(ego.center.x() + r * std::cos(theta), ego.center.y() + r * std::sin(theta),
                                     actor.half_extent.z());
      actor.yaw = random_heading ? rng.uniform(-kPi, kPi) : sp.yaw + (rng.index(2) ? kPi : 0.0);
      bool clear = true;
      for (const auto& other : world.actors()) {
        if (footprints_overlap(actor, other, 0.3)) {
          clear = false;
          break;
        }
      }
      if (clear) {
        world.add_actor(std::move(actor));
        return;
      }
    }
    fail(ErrorCode::kSpawn, "spawn collision: could not place actor index " + std::to_string(index));
  };

  SeededRng vehicle_rng(mix_seed(config.seed, 1));
  for (int i = 0; i < config.n_vehicles; ++i) {
    const VehicleType& type = kVehicleTypes[pool[vehicle_rng.index(pool.size())]];
    MockActor v;
    v.id = next_id++;
    v.type_id = type.type_id;
    v.half_extent = {type.half_length, type.half_width, kVehicleHalfHeight};
    v.color = actor_color(color_rng);
    const bool parked = vehicle_rng.uniform() < config.parked_fraction;
    v.speed_mps = parked ? 0.0 : vehicle_rng.uniform(config.vehicle_speed_range_mps[0],
                                                     config.vehicle_speed_range_mps[1]);
    v.equipped = config.equip == EquipPolicy::kAllVehicles && !type.large;
    place(std::move(v), vehicle_rng, 6.0, 35.0, i + 1, false);
  }

  SeededRng walker_rng(mix_seed(config.seed, 2));
  for (int i = 0; i < config.n_pedestrians; ++i) {
    MockActor p;
    p.id = next_id++;
    p.kind = ActorKind::kPedestrian;
    char type_id[32];
    std::snprintf(type_id, sizeof type_id, "walker.pedestrian.%04d", static_cast<int>(1 + walker_rng.index(48)));
    p.type_id = type_id;
    p.half_extent = kPedestrianHalf;
    p.color = actor_color(color_rng);
    place(std::move(p), walker_rng, 4.0, 30.0, config.n_vehicles + 1 + i, true);
  }
  return world;
}

std::unique_ptr<Session> MockBackend::load(const SceneConfig& config) {
  return std::make_unique<MockSession>(config, build_mock_world(config));
}

std::unique_ptr<Session> make_mock_session(const SceneConfig& config, MockWorld world) {
  return std::make_unique<MockSession>(config, std::move(world));
}

std::vector<CameraCapture> place_rig(const CameraRig& rig, const CameraPose& body_pose) {
  std::vector<CameraCapture> out;
  out.reserve(rig.size());
  for (const auto& entry : rig.entries()) {
    CameraCapture c;
    c.name = entry.name;
    c.pose = body_pose.compose(entry.pose);
    c.intrinsics = entry.intrinsics;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace egoexo
