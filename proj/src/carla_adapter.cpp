#include "egoexo/carla_adapter.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>

#include "egoexo/error.hpp"
#include "egoexo/image_io.hpp"

#ifndef EGOEXO_BRIDGE_SCRIPT
#define EGOEXO_BRIDGE_SCRIPT "carla_bridge.py"
#endif

namespace egoexo {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDepthScale = 256.0 * 256.0 * 256.0 - 1.0;

double rad(double deg) { return deg * kPi / 180.0; }
double deg(double rad) { return rad * 180.0 / kPi; }

Eigen::Vector3d vec3(const Json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}
Json vec3_json(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

// Rotation angles of a SIM_NATIVE rotation matrix, inverse of carla_rotation.
std::array<double, 3> carla_angles(const Eigen::Matrix3d& r) {
  const double pitch = std::asin(std::clamp(r(2, 0), -1.0, 1.0));
  if (std::abs(r(2, 0)) > 1.0 - 1e-12) {
    // Looking straight up or down: yaw and roll share one axis, keep roll 0.
    return {deg(pitch), deg(std::atan2(-r(0, 1), r(1, 1))), 0.0};
  }
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  const double roll = std::atan2(-r(2, 1), r(2, 2));
  return {deg(pitch), deg(yaw), deg(roll)};
}

Json transform_json(const CameraPose& sim_pose) {
  const auto a = carla_angles(sim_pose.rotation());
  return {{"location", vec3_json(sim_pose.translation())}, {"rotation", Json::array({a[0], a[1], a[2]})}};
}

CameraPose pose_from_json(const Json& j) {
  const Eigen::Vector3d loc = vec3(j.at("location"));
  const Json& rot = j.at("rotation");
  return carla_sensor_pose(loc, rot.at(0).get<double>(), rot.at(1).get<double>(), rot.at(2).get<double>());
}

Json rig_request(const CameraRig& rig) {
  Json cameras = Json::array();
  for (const auto& e : rig.entries()) {
    const CameraPose sim = convert_convention(e.pose, Convention::kSimNative);
    Json cam = transform_json(sim);
    cam["name"] = e.name;
    cam["fov_deg"] = e.fov_deg;
    cam["width"] = e.intrinsics.width;
    cam["height"] = e.intrinsics.height;
    cameras.push_back(cam);
  }
  return cameras;
}

void check_response(const Json& response, const std::string& cmd) {
  if (response.contains("error")) {
    const std::string message = response["error"].get<std::string>();
    const std::string kind = response.value("kind", std::string("backend"));
    if (kind == "not-found") fail(ErrorCode::kNotFound, "carla: " + message);
    if (kind == "spawn") fail(ErrorCode::kSpawn, "carla: " + message);
    if (kind == "unavailable") fail(ErrorCode::kBackendUnavailable, "carla: " + message);
    fail(ErrorCode::kIo, "carla " + cmd + ": " + message);
  }
}

std::vector<float> read_floats(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<float> data(size / sizeof(float));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  return data;
}

void write_floats(const std::filesystem::path& path, const std::vector<float>& data) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
}

BBox3D bbox_from_json(const Json& j) {
  BBox3D b;
  b.actor_id = j.at("actor_id").get<int>();
  b.class_id = j.at("class_id").get<std::uint16_t>();
  b.center = carla_to_gl_point(vec3(j.at("center")));
  b.extent = vec3(j.at("extent"));
  b.yaw = -rad(j.at("yaw_deg").get<double>());
  return b;
}

Json bbox_to_json(const BBox3D& b) {
  return {{"actor_id", b.actor_id},
          {"class_id", b.class_id},
          {"center", vec3_json(carla_to_gl_point(b.center))},
          {"extent", vec3_json(b.extent)},
          {"yaw_deg", -deg(b.yaw)}};
}

// --- bridge process ---------------------------------------------------------

class BridgeClient : public CarlaClient {
 public:
  BridgeClient(const CarlaConnection& c, const std::filesystem::path& script) {
    char tmpl[] = "/tmp/egoexo_carla_XXXXXX";
    if (!mkdtemp(tmpl)) fail(ErrorCode::kIo, "cannot create bridge data directory");
    data_dir_ = tmpl;
    timeout_ms_ = static_cast<int>(c.timeout_seconds * 1000.0);
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) fail(ErrorCode::kIo, "pipe failed");
    const std::string python = std::getenv("EGOEXO_PYTHON") ? std::getenv("EGOEXO_PYTHON") : "python3";
    const std::vector<std::string> args = {python,      script.string(),   "--host", c.host,
                                           "--port",    std::to_string(c.port), "--timeout",
                                           std::to_string(c.timeout_seconds), "--data-dir", data_dir_.string()};
    pid_ = fork();
    if (pid_ < 0) fail(ErrorCode::kIo, "fork failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[1]);
      close(from_child[0]);
      std::vector<char*> argv;
      for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      execvp(argv[0], argv.data());
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
    signal(SIGPIPE, SIG_IGN);
  }

  ~BridgeClient() override {
    if (in_fd_ >= 0) close(in_fd_);
    if (out_fd_ >= 0) close(out_fd_);
    if (pid_ > 0) {
      int status = 0;
      if (waitpid(pid_, &status, WNOHANG) == 0) {
        kill(pid_, SIGTERM);
        waitpid(pid_, &status, 0);
      }
    }
    std::error_code ec;
    std::filesystem::remove_all(data_dir_, ec);
  }

  Json request(const Json& request) override {
    const std::string line = request.dump() + "\n";
    std::size_t sent = 0;
    while (sent < line.size()) {
      const ssize_t n = write(in_fd_, line.data() + sent, line.size() - sent);
      if (n <= 0) fail(ErrorCode::kBackendUnavailable, "carla bridge exited");
      sent += static_cast<std::size_t>(n);
    }
    std::string response;
    while (true) {
      const auto newline = buffer_.find('\n');
      if (newline != std::string::npos) {
        response = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        break;
      }
      pollfd pfd{out_fd_, POLLIN, 0};
      // Ticks render many sensors; allow several timeouts worth per reply.
      const int ready = poll(&pfd, 1, timeout_ms_ * 10);
      if (ready <= 0) fail(ErrorCode::kBackendUnavailable, "carla bridge timed out");
      char chunk[65536];
      const ssize_t n = read(out_fd_, chunk, sizeof chunk);
      if (n <= 0) fail(ErrorCode::kBackendUnavailable, "carla bridge exited");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
    try {
      return Json::parse(response);
    } catch (const Json::exception& e) {
      fail(ErrorCode::kParse, std::string("carla bridge sent malformed JSON: ") + e.what());
    }
  }

  std::filesystem::path data_dir() const override { return data_dir_; }

 private:
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  int timeout_ms_ = 10000;
  std::string buffer_;
  std::filesystem::path data_dir_;
};

class ReplayClient : public CarlaClient {
 public:
  explicit ReplayClient(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::ifstream in(dir_ / "responses.jsonl");
    if (!in) fail(ErrorCode::kNotFound, "no responses.jsonl in " + dir_.string());
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) responses_.push_back(Json::parse(line));
    }
  }

  Json request(const Json& request) override {
    if (next_ >= responses_.size()) fail(ErrorCode::kState, "replay exhausted");
    const Json& response = responses_[next_++];
    const std::string cmd = request.at("cmd").get<std::string>();
    if (response.value("cmd", std::string()) != cmd) {
      fail(ErrorCode::kState, "replay expected '" + response.value("cmd", std::string()) + "' but got '" + cmd + "'");
    }
    return response;
  }

  std::filesystem::path data_dir() const override { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<Json> responses_;
  std::size_t next_ = 0;
};

// --- session ----------------------------------------------------------------

class CarlaSession : public Session {
 public:
  CarlaSession(SceneConfig config, std::unique_ptr<CarlaClient> client)
      : config_(std::move(config)), client_(std::move(client)) {
    config_.validate();
    const Json hello = client_->request({{"cmd", "hello"}});
    check_response(hello, "hello");
    const std::string version = hello.value("carla_version", std::string("unknown"));
    if (version != kCarlaVersion) {
      fail(ErrorCode::kIncompatible,
           "carla server reports version " + version + ", adapter requires " + std::string(kCarlaVersion));
    }
    ego_rig_ = config_.ego_rig.build();
    exo_rig_ = config_.exo_rig.build();
    Json load{{"cmd", "load"},
              {"config", to_json(config_)},
              {"synchronous_mode", true},
              {"fixed_delta_seconds", config_.tick_seconds},
              {"rigs", {{"nuscenes", rig_request(ego_rig_)}, {"sphere", rig_request(exo_rig_)}}}};
    const Json response = client_->request(load);
    check_response(response, "load");
    config_.start_offset_s = response.at("start_offset_s").get<double>();
    sim_time_ = response.value("sim_time", 0.0);
    for (const auto& a : response.at("actors")) {
      ActorInfo info;
      info.id = a.at("id").get<int>();
      info.kind = a.at("kind").get<std::string>() == "pedestrian" ? ActorKind::kPedestrian : ActorKind::kVehicle;
      info.type_id = a.at("type_id").get<std::string>();
      info.is_ego = a.value("is_ego", false);
      info.equipped = a.value("equipped", false);
      info.parked = a.value("parked", false);
      info.speed_mps = a.value("speed_mps", 0.0);
      info.bbox = bbox_from_json(a.at("bbox"));
      actors_.push_back(info);
    }
  }

  ~CarlaSession() override {
    if (open_) {
      try {
        close();
      } catch (...) {
      }
    }
  }

  const SceneConfig& config() const override { return config_; }
  std::vector<ActorInfo> actors() const override { return actors_; }
  double sim_time() const override { return sim_time_; }

  CaptureBundle tick() override {
    if (!open_) fail(ErrorCode::kState, "session is closed");
    const Json r = client_->request({{"cmd", "tick"}});
    check_response(r, "tick");
    const std::filesystem::path dir = client_->data_dir();
    CaptureBundle bundle;
    bundle.step = step_++;
    bundle.sim_time = r.at("sim_time").get<double>();
    bundle.elapsed = r.at("elapsed").get<double>();
    sim_time_ = bundle.sim_time;
    for (const auto& b : r.at("bboxes")) bundle.bboxes.push_back(bbox_from_json(b));
    for (const auto& a : r.at("actors")) {
      ActorCapture ac;
      ac.actor_id = a.at("actor_id").get<int>();
      for (const auto& g : a.at("groups")) {
        const std::string name = g.at("group").get<std::string>();
        const CameraRig& rig = name == "sphere" ? exo_rig_ : ego_rig_;
        RigGroupCapture group;
        group.group = name;
        group.rig_name = rig.name();
        group.rig_version = rig.version();
        const auto& cams = g.at("cameras");
        if (cams.size() != rig.size()) fail(ErrorCode::kIo, "carla: camera count mismatch in group " + name);
        for (std::size_t i = 0; i < cams.size(); ++i) {
          const auto& c = cams[i];
          CameraCapture cap;
          cap.name = rig[i].name;
          cap.intrinsics = rig[i].intrinsics;
          cap.pose = convert_convention(pose_from_json(c), Convention::kOpenGL);
          cap.frame.rgb = read_png_rgb8(dir / c.at("rgb").get<std::string>());
          cap.frame.depth = decode_carla_depth_image(read_png_rgb8(dir / c.at("depth").get<std::string>()));
          cap.frame.semantic = decode_carla_semantic(read_png_rgb8(dir / c.at("semantic").get<std::string>()));
          cap.frame.instance = decode_carla_instance(read_png_rgb8(dir / c.at("instance").get<std::string>()));
          if (c.contains("flow")) {
            const auto raw = read_floats(dir / c.at("flow").get<std::string>());
            const int w = cap.intrinsics.width, h = cap.intrinsics.height;
            if (raw.size() != static_cast<std::size_t>(w) * h * 2) fail(ErrorCode::kIo, "carla: bad flow payload");
            ImageF64 uv(w, h, 2);
            for (std::size_t k = 0; k < raw.size(); ++k) uv.data()[k] = raw[k];
            cap.frame.flow = decode_carla_flow(uv, w, h);
          }
          if (!cap.frame.rgb.same_shape(cap.intrinsics.width, cap.intrinsics.height)) {
            fail(ErrorCode::kIo, "carla: image size does not match the rig for " + cap.name);
          }
          group.fov_deg.push_back(rig[i].fov_deg);
          group.cameras.push_back(std::move(cap));
        }
        ac.groups.push_back(std::move(group));
      }
      if (a.contains("lidar")) {
        const Json& l = a["lidar"];
        const CameraPose sim = pose_from_json(l);
        LidarCapture lc;
        // LiDAR axes coincide with a camera's native axes.
        lc.pose = convert_convention(sim, Convention::kOpenGL);
        const auto raw = read_floats(dir / l.at("points").get<std::string>());
        for (std::size_t k = 0; k + 3 < raw.size(); k += 4) {
          const Eigen::Vector3d local(raw[k], raw[k + 1], raw[k + 2]);
          const Eigen::Vector3d world = carla_to_gl_point(sim.to_world(local));
          lc.cloud.points.emplace_back(world.x(), world.y(), world.z(), std::clamp<double>(raw[k + 3], 0.0, 1.0));
        }
        ac.lidar = std::move(lc);
      }
      bundle.actors.push_back(std::move(ac));
    }
    return bundle;
  }

  void remove_dynamic_vehicles() override {
    if (!open_) fail(ErrorCode::kState, "session is closed");
    const Json r = client_->request({{"cmd", "remove_dynamic_vehicles"}});
    check_response(r, "remove_dynamic_vehicles");
    std::set<int> removed;
    for (const auto& id : r.at("removed")) removed.insert(id.get<int>());
    std::erase_if(actors_, [&](const ActorInfo& a) { return removed.count(a.id) > 0; });
  }

  void close() override {
    if (!open_) return;
    open_ = false;
    check_response(client_->request({{"cmd", "close"}}), "close");
  }

  bool is_open() const override { return open_; }

 private:
  SceneConfig config_;
  std::unique_ptr<CarlaClient> client_;
  CameraRig ego_rig_;
  CameraRig exo_rig_;
  std::vector<ActorInfo> actors_;
  double sim_time_ = 0.0;
  int step_ = 0;
  bool open_ = true;
};

}  // namespace

// --- connection -------------------------------------------------------------

CarlaConnection CarlaConnection::from_env() {
  CarlaConnection c;
  if (const char* host = std::getenv("EGOEXO_CARLA_HOST"); host && *host) c.host = host;
  if (const char* port = std::getenv("EGOEXO_CARLA_PORT"); port && *port) {
    char* end = nullptr;
    const long p = std::strtol(port, &end, 10);
    if (*end != '\0' || p <= 0 || p > 65535) {
      fail(ErrorCode::kInvalidArgument, std::string("EGOEXO_CARLA_PORT is not a port: ") + port);
    }
    c.port = static_cast<int>(p);
  }
  return c;
}

void CarlaConnection::check(const SceneConfig& config) const {
  if (!synchronous_mode) fail(ErrorCode::kInvalidArgument, "carla capture requires synchronous mode");
  if (fixed_delta_seconds != config.tick_seconds) {
    fail(ErrorCode::kInvalidArgument, "carla fixed_delta_seconds must equal the scene tick_seconds");
  }
}

void probe_carla_server(const CarlaConnection& c) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const std::string port = std::to_string(c.port);
  if (getaddrinfo(c.host.c_str(), port.c_str(), &hints, &result) != 0) {
    fail(ErrorCode::kBackendUnavailable, "cannot resolve carla host " + c.host);
  }
  bool connected = false;
  for (addrinfo* ai = result; ai && !connected; ai = ai->ai_next) {
    const int fd = socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    fcntl(fd, F_SETFL, fcntl(fd, F_GETFL, 0) | O_NONBLOCK);
    int rc = connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc == 0) {
      connected = true;
    } else if (errno == EINPROGRESS) {
      pollfd pfd{fd, POLLOUT, 0};
      if (poll(&pfd, 1, static_cast<int>(c.timeout_seconds * 1000.0)) == 1) {
        int err = 0;
        socklen_t len = sizeof err;
        getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        connected = err == 0;
      }
    }
    ::close(fd);
  }
  freeaddrinfo(result);
  if (!connected) {
    fail(ErrorCode::kBackendUnavailable, "carla server unreachable at " + c.host + ":" + port);
  }
}

// --- encodings --------------------------------------------------------------

double decode_carla_depth(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double normalized = (r + g * 256.0 + b * 65536.0) / kDepthScale;
  return kCarlaDepthFarM * normalized;
}

std::array<std::uint8_t, 3> encode_carla_depth(double meters) {
  const double clamped = std::clamp(meters, 0.0, kCarlaDepthFarM);
  const auto code = static_cast<std::uint32_t>(std::llround(clamped / kCarlaDepthFarM * kDepthScale));
  return {static_cast<std::uint8_t>(code & 0xFF), static_cast<std::uint8_t>((code >> 8) & 0xFF),
          static_cast<std::uint8_t>((code >> 16) & 0xFF)};
}

ImageF64 decode_carla_depth_image(const ImageRgb8& native, double far_plane_m) {
  ImageF64 out(native.width(), native.height(), 1, 0.0);
  for (int y = 0; y < native.height(); ++y) {
    for (int x = 0; x < native.width(); ++x) {
      const double d = decode_carla_depth(native.at(x, y, 0), native.at(x, y, 1), native.at(x, y, 2));
      out.at(x, y) = d >= far_plane_m ? 0.0 : d;
    }
  }
  return out;
}

ImageU16 decode_carla_semantic(const ImageRgb8& native) {
  ImageU16 out(native.width(), native.height(), 1, 0);
  for (int y = 0; y < native.height(); ++y) {
    for (int x = 0; x < native.width(); ++x) out.at(x, y) = native.at(x, y, 0);
  }
  return out;
}

ImageU16 decode_carla_instance(const ImageRgb8& native) {
  ImageU16 out(native.width(), native.height(), 1, 0);
  for (int y = 0; y < native.height(); ++y) {
    for (int x = 0; x < native.width(); ++x) {
      out.at(x, y) = static_cast<std::uint16_t>(native.at(x, y, 1) | (native.at(x, y, 2) << 8));
    }
  }
  return out;
}

ImageF64 decode_carla_flow(const ImageF64& native_uv, int width, int height) {
  ImageF64 out(width, height, 3, 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out.at(x, y, 0) = native_uv.at(x, y, 0) * width * 0.5;
      out.at(x, y, 1) = native_uv.at(x, y, 1) * height * 0.5;
      out.at(x, y, 2) = 1.0;
    }
  }
  return out;
}

Eigen::Matrix3d carla_rotation(double pitch_deg, double yaw_deg, double roll_deg) {
  const double cp = std::cos(rad(pitch_deg)), sp = std::sin(rad(pitch_deg));
  const double cy = std::cos(rad(yaw_deg)), sy = std::sin(rad(yaw_deg));
  const double cr = std::cos(rad(roll_deg)), sr = std::sin(rad(roll_deg));
  Eigen::Matrix3d m;
  m << cp * cy, cy * sp * sr - sy * cr, -cy * sp * cr - sy * sr,  //
      cp * sy, sy * sp * sr + cy * cr, -sy * sp * cr + cy * sr,   //
      sp, -cp * sr, cp * cr;
  return m;
}

CameraPose carla_sensor_pose(const Eigen::Vector3d& location, double pitch_deg, double yaw_deg, double roll_deg) {
  return CameraPose(carla_rotation(pitch_deg, yaw_deg, roll_deg), location, Convention::kSimNative);
}

Eigen::Vector3d carla_to_gl_point(const Eigen::Vector3d& p) { return {p.x(), -p.y(), p.z()}; }

// --- factories --------------------------------------------------------------

std::unique_ptr<CarlaClient> make_bridge_client(const CarlaConnection& connection,
                                                const std::filesystem::path& bridge_script) {
  return std::make_unique<BridgeClient>(connection, bridge_script);
}

std::unique_ptr<CarlaClient> make_replay_client(const std::filesystem::path& fixture_dir) {
  return std::make_unique<ReplayClient>(fixture_dir);
}

std::unique_ptr<Session> make_carla_session(const SceneConfig& config, std::unique_ptr<CarlaClient> client) {
  return std::make_unique<CarlaSession>(config, std::move(client));
}

CarlaBackend::CarlaBackend(CarlaConnection connection, std::filesystem::path bridge_script)
    : connection_(std::move(connection)), bridge_script_(std::move(bridge_script)) {
  if (bridge_script_.empty()) {
    const char* env = std::getenv("EGOEXO_CARLA_BRIDGE");
    bridge_script_ = env && *env ? env : EGOEXO_BRIDGE_SCRIPT;
  }
}

std::unique_ptr<Session> CarlaBackend::load(const SceneConfig& config) {
  CarlaConnection c = connection_;
  c.fixed_delta_seconds = config.tick_seconds;
  c.check(config);
  probe_carla_server(c);
  return make_carla_session(config, make_bridge_client(c, bridge_script_));
}

std::unique_ptr<Backend> make_carla_backend() { return std::make_unique<CarlaBackend>(); }

// --- fixture recording ------------------------------------------------------

void record_mock_as_carla_fixture(const SceneConfig& config, int ticks, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto session = MockBackend().load(config);
  std::ofstream out(dir / "responses.jsonl");
  const auto emit = [&out](const Json& j) { out << j.dump() << "\n"; };

  emit({{"cmd", "hello"}, {"carla_version", std::string(kCarlaVersion)}});
  Json actors = Json::array();
  for (const auto& a : session->actors()) {
    actors.push_back({{"id", a.id},
                      {"kind", a.kind == ActorKind::kPedestrian ? "pedestrian" : "vehicle"},
                      {"type_id", a.type_id},
                      {"is_ego", a.is_ego},
                      {"equipped", a.equipped},
                      {"parked", a.parked},
                      {"speed_mps", a.speed_mps},
                      {"bbox", bbox_to_json(a.bbox)}});
  }
  emit({{"cmd", "load"},
        {"start_offset_s", *session->config().start_offset_s},
        {"sim_time", session->sim_time()},
        {"actors", actors}});
  if (config.remove_dynamic_vehicles) {
    std::set<int> before;
    for (const auto& a : session->actors()) before.insert(a.id);
    session->remove_dynamic_vehicles();
    for (const auto& a : session->actors()) before.erase(a.id);
    emit({{"cmd", "remove_dynamic_vehicles"}, {"removed", before}});
  }

  for (int t = 0; t < ticks; ++t) {
    const CaptureBundle b = session->tick();
    Json bboxes = Json::array();
    for (const auto& box : b.bboxes) bboxes.push_back(bbox_to_json(box));
    Json actor_list = Json::array();
    for (const auto& ac : b.actors) {
      Json groups = Json::array();
      for (const auto& g : ac.groups) {
        Json cams = Json::array();
        for (std::size_t i = 0; i < g.cameras.size(); ++i) {
          const auto& cam = g.cameras[i];
          const std::string stem = "t" + std::to_string(t) + "_" + std::to_string(ac.actor_id) + "_" + g.group +
                                   "_" + std::to_string(i);
          const int w = cam.intrinsics.width, h = cam.intrinsics.height;
          ImageRgb8 depth(w, h, 3), sem(w, h, 3), inst(w, h, 3);
          const double far_plane_m = kCarlaDepthFarM;
          for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
              const double d = cam.frame.depth.at(x, y);
              const auto code = encode_carla_depth(d > 0.0 ? d : far_plane_m);
              const std::uint16_t id = cam.frame.instance.at(x, y);
              const auto tag = static_cast<std::uint8_t>(cam.frame.semantic.at(x, y));
              for (int k = 0; k < 3; ++k) depth.at(x, y, k) = code[k];
              sem.at(x, y, 0) = tag;
              inst.at(x, y, 0) = tag;
              inst.at(x, y, 1) = static_cast<std::uint8_t>(id & 0xFF);
              inst.at(x, y, 2) = static_cast<std::uint8_t>(id >> 8);
            }
          }
          write_png_rgb8(dir / (stem + "_rgb.png"), cam.frame.rgb);
          write_png_rgb8(dir / (stem + "_depth.png"), depth);
          write_png_rgb8(dir / (stem + "_semantic.png"), sem);
          write_png_rgb8(dir / (stem + "_instance.png"), inst);
          Json c = transform_json(convert_convention(cam.pose, Convention::kSimNative));
          c["rgb"] = stem + "_rgb.png";
          c["depth"] = stem + "_depth.png";
          c["semantic"] = stem + "_semantic.png";
          c["instance"] = stem + "_instance.png";
          if (cam.frame.flow) {
            std::vector<float> uv;
            uv.reserve(static_cast<std::size_t>(w) * h * 2);
            for (int y = 0; y < h; ++y) {
              for (int x = 0; x < w; ++x) {
                uv.push_back(static_cast<float>(cam.frame.flow->at(x, y, 0) * 2.0 / w));
                uv.push_back(static_cast<float>(cam.frame.flow->at(x, y, 1) * 2.0 / h));
              }
            }
            write_floats(dir / (stem + "_flow.bin"), uv);
            c["flow"] = stem + "_flow.bin";
          }
          cams.push_back(c);
        }
        groups.push_back({{"group", g.group}, {"cameras", cams}});
      }
      Json entry{{"actor_id", ac.actor_id}, {"groups", groups}};
      if (ac.lidar) {
        const CameraPose sim = convert_convention(ac.lidar->pose, Convention::kSimNative);
        std::vector<float> raw;
        for (const auto& p : ac.lidar->cloud.points) {
          const Eigen::Vector3d local = sim.to_camera(carla_to_gl_point(p.head<3>()));
          for (int k = 0; k < 3; ++k) raw.push_back(static_cast<float>(local[k]));
          raw.push_back(static_cast<float>(p[3]));
        }
        const std::string name = "t" + std::to_string(t) + "_" + std::to_string(ac.actor_id) + "_lidar.bin";
        write_floats(dir / name, raw);
        Json l = transform_json(sim);
        l["points"] = name;
        entry["lidar"] = l;
      }
      actor_list.push_back(entry);
    }
    emit({{"cmd", "tick"}, {"sim_time", b.sim_time}, {"elapsed", b.elapsed}, {"bboxes", bboxes}, {"actors", actor_list}});
  }
  emit({{"cmd", "close"}});
}

}  // namespace egoexo
