#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "egoexo/json_io.hpp"
#include "egoexo/scene_backend.hpp"

namespace egoexo {

// Simulator release the adapter and the bridge script are written against.
inline constexpr std::string_view kCarlaVersion = "0.9.15";

struct CarlaConnection {
  std::string host = "localhost";
  int port = 2000;
  double timeout_seconds = 10.0;
  bool synchronous_mode = true;
  double fixed_delta_seconds = 0.1;

  // Defaults overridden by EGOEXO_CARLA_HOST / EGOEXO_CARLA_PORT.
  static CarlaConnection from_env();
  // Synchronous mode is mandatory and the fixed step must equal the scene
  // tick; throws invalid-argument otherwise.
  void check(const SceneConfig& config) const;
};

// --- native encodings -------------------------------------------------------

// Depth camera packs normalized depth into 24 bits:
// meters = 1000 * (R + G*256 + B*256^2) / (256^3 - 1).
inline constexpr double kCarlaDepthFarM = 1000.0;
double decode_carla_depth(std::uint8_t r, std::uint8_t g, std::uint8_t b);
std::array<std::uint8_t, 3> encode_carla_depth(double meters);

// Converts a native depth image to planar meters. Pixels at or beyond
// far_plane_m are treated as sky and become 0.
ImageF64 decode_carla_depth_image(const ImageRgb8& native, double far_plane_m = kCarlaDepthFarM);

// Semantic camera stores the tag in R. The instance camera stores the tag in
// R and the 16-bit object id as G | B << 8.
ImageU16 decode_carla_semantic(const ImageRgb8& native);
ImageU16 decode_carla_instance(const ImageRgb8& native);

// Optical flow camera emits per-pixel motion normalized to [-2, 2] across
// the image; pixels = value * size / 2. The valid plane is set to 1.
ImageF64 decode_carla_flow(const ImageF64& native_uv, int width, int height);

// carla.Transform rotation (degrees) in the simulator's left-handed world.
Eigen::Matrix3d carla_rotation(double pitch_deg, double yaw_deg, double roll_deg);
// Sensor transform -> SIM_NATIVE camera pose.
CameraPose carla_sensor_pose(const Eigen::Vector3d& location, double pitch_deg, double yaw_deg,
                             double roll_deg);
// Point in the simulator's left-handed world -> OPENGL world.
Eigen::Vector3d carla_to_gl_point(const Eigen::Vector3d& p);

// --- client protocol --------------------------------------------------------

// Request/response channel to a simulator process. Every request is one JSON
// object with a "cmd" field; every response is one JSON object that either
// carries "error" or the command's payload. Binary payloads are files in
// the directory reported by data_dir().
class CarlaClient {
 public:
  virtual ~CarlaClient() = default;
  virtual Json request(const Json& request) = 0;
  virtual std::filesystem::path data_dir() const = 0;
};

// Raises backend-unavailable unless a TCP connection to host:port opens
// within the timeout.
void probe_carla_server(const CarlaConnection& connection);

// Live client: runs the Python bridge script as a child process and speaks
// JSON lines over its stdin/stdout.
std::unique_ptr<CarlaClient> make_bridge_client(const CarlaConnection& connection,
                                                const std::filesystem::path& bridge_script);

// Replays a recorded session: fixture_dir/responses.jsonl holds one response
// per request, in order, and binary payloads sit next to it. Requests are
// checked against the "cmd" recorded with each response.
std::unique_ptr<CarlaClient> make_replay_client(const std::filesystem::path& fixture_dir);

// Session over any client. Translates native poses, depth, labels and LiDAR
// into the canonical types.
std::unique_ptr<Session> make_carla_session(const SceneConfig& config, std::unique_ptr<CarlaClient> client);

class CarlaBackend : public Backend {
 public:
  explicit CarlaBackend(CarlaConnection connection = CarlaConnection::from_env(),
                        std::filesystem::path bridge_script = {});
  std::string name() const override { return "carla"; }
  std::unique_ptr<Session> load(const SceneConfig& config) override;

 private:
  CarlaConnection connection_;
  std::filesystem::path bridge_script_;
};

std::unique_ptr<Backend> make_carla_backend();

// Writes the responses a bridge would have produced for the given mock
// session, using the native encodings above. Used to build replay fixtures.
void record_mock_as_carla_fixture(const SceneConfig& config, int ticks, const std::filesystem::path& fixture_dir);

}  // namespace egoexo
