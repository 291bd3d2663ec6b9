#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "egoexo/json_io.hpp"

namespace egoexo {

// SIM_NATIVE: left-handed simulator world (x forward, y right, z up) with
// camera axes x forward, y right, z up.
// OPENGL: right-handed world (x forward, y left, z up) with camera axes
// +X right, +Y up, -Z look direction.
enum class Convention { kSimNative, kOpenGL };

std::string_view to_string(Convention convention);

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  double k1 = 0.0;
  double k2 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;

  // Throws invalid-argument unless fx, fy > 0 and the principal point lies
  // strictly inside the image.
  void validate() const;

  double horizontal_fov_rad() const;
  double vertical_fov_rad() const;
  Eigen::Matrix3d matrix() const;

  bool operator==(const CameraIntrinsics&) const = default;
};

// Camera-to-world rigid transform tagged with its axis convention.
class CameraPose {
 public:
  CameraPose() = default;
  // Throws invalid-argument if the rotation is not orthonormal with det +1
  // (tolerance 1e-9).
  CameraPose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
             Convention convention);

  static CameraPose identity(Convention convention);
  static CameraPose from_matrix(const Eigen::Matrix4d& camera_to_world, Convention convention);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Convention convention() const { return convention_; }

  Eigen::Matrix4d matrix() const;

  // Optical axis in world coordinates for either convention.
  Eigen::Vector3d forward() const;

  Eigen::Vector3d to_world(const Eigen::Vector3d& camera_point) const {
    return rotation_ * camera_point + translation_;
  }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& world_point) const {
    return rotation_.transpose() * (world_point - translation_);
  }

  // this ∘ child; both operands must share a convention.
  CameraPose compose(const CameraPose& child) const;

  bool operator==(const CameraPose& other) const {
    return convention_ == other.convention_ && rotation_ == other.rotation_ &&
           translation_ == other.translation_;
  }

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
  Convention convention_ = Convention::kOpenGL;
};

// Max of |RᵀR − I| and |det R − 1|.
double orthonormality_error(const Eigen::Matrix3d& rotation);

struct SpherePoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

// kGolden uses pi*(3 - sqrt 5); kVerbatim uses the literal constant 3*pi - sqrt 5
// (an alternative reading of the lattice angle).
enum class PhiMode { kGolden, kVerbatim };

double golden_angle(PhiMode mode);

struct Orientation {
  double pitch = 0.0;
  double yaw = 0.0;
  bool degenerate = false;
};

// Half-sphere Fibonacci lattice: heights are linspace(0, 1, n) inclusive and
// point i is rotated by i * phi around z.
std::vector<SpherePoint> fibonacci_half_sphere(int n, PhiMode mode = PhiMode::kGolden);

// pitch = asin(z), yaw = sign(x) * acos(y / hypot(x, y)) with sign(0) = +1.
// On the pole yaw is 0 and the result is flagged degenerate.
Orientation radial_orientation(const Eigen::Vector3d& direction);
Orientation inward_orientation(const SpherePoint& point);

struct LookAtResult {
  CameraPose pose;
  bool degenerate = false;  // up hint was parallel to the view direction
};

LookAtResult look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                     const Eigen::Vector3d& up_hint = Eigen::Vector3d::UnitZ());

CameraIntrinsics fov_to_intrinsics(double fov_deg, int width, int height);

CameraPose convert_convention(const CameraPose& pose, Convention target);

// Rotation from roll/pitch/yaw in degrees: Rz(yaw) * Ry(pitch) * Rx(roll).
Eigen::Matrix3d rotation_from_rpy_deg(double roll, double pitch, double yaw);

struct RigEntry {
  std::string name;
  CameraPose pose;  // relative to the body frame
  CameraIntrinsics intrinsics;
  double fov_deg = 0.0;
};

class CameraRig {
 public:
  CameraRig() = default;
  explicit CameraRig(std::string name, std::string version = {})
      : name_(std::move(name)), version_(std::move(version)) {}

  // Rejects duplicate names and mixed conventions.
  void add(RigEntry entry);

  const std::string& name() const { return name_; }
  const std::string& version() const { return version_; }
  const std::vector<RigEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const RigEntry& operator[](std::size_t i) const { return entries_[i]; }

 private:
  std::string name_;
  std::string version_;
  std::vector<RigEntry> entries_;
};

struct ExoRigParams {
  int n = 100;
  double radius_m = 10.0;
  double z_offset_m = 0.0;
  Eigen::Vector3d center_m = Eigen::Vector3d::Zero();
  double fov_deg = 90.0;
  int width = 800;
  int height = 600;
  PhiMode phi_mode = PhiMode::kGolden;
};

CameraRig make_exo_rig(const ExoRigParams& params);

// Every camera looks at params.center_m; positions before the z offset sit
// exactly radius_m away from it.
inline CameraRig make_exo_rig(int n, double radius_m, double z_offset_m,
                              const Eigen::Vector3d& center_m, double fov_deg, int width,
                              int height) {
  return make_exo_rig(ExoRigParams{n, radius_m, z_offset_m, center_m, fov_deg, width, height,
                                   PhiMode::kGolden});
}

enum class EgoPreset { kNuScenesLike, kKitti360Like, kWaymoLike, kArgoverseLike, kInterFuserLike };
enum class PresetVariant { kFov90All, kMixedBack110 };

std::string_view to_string(EgoPreset preset);
std::string_view to_string(PresetVariant variant);
// Throws not-found for unknown names.
EgoPreset parse_ego_preset(std::string_view name);
PresetVariant parse_preset_variant(std::string_view name);
PhiMode parse_phi_mode(std::string_view name);
std::string_view to_string(PhiMode mode);

std::vector<std::string> preset_names();

// Raw preset document shipped with the library.
const Json& builtin_preset_document(EgoPreset preset);

// Builds a rig from a preset document {name, version, entries:[{name,
// translation_m, rotation_rpy_deg, fov_deg, width, height}]}. kFov90All
// forces every entry to 90 degrees.
CameraRig rig_from_preset_document(const Json& document, PresetVariant variant);

CameraRig ego_preset(EgoPreset preset, PresetVariant variant);
CameraRig ego_preset(std::string_view name, PresetVariant variant);

}  // namespace egoexo
