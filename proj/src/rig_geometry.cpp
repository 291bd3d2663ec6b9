#include "egoexo/rig_geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>

#include <Eigen/Geometry>

#include "egoexo/error.hpp"
#include "preset_data.hpp"

namespace egoexo {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kOrthonormalTolerance = 1e-9;

double deg_to_rad(double deg) { return deg * kPi / 180.0; }

// World flip between the left-handed simulator world and the right-handed
// OPENGL world.
const Eigen::Matrix3d& world_flip() {
  static const Eigen::Matrix3d flip = Eigen::Vector3d(1.0, -1.0, 1.0).asDiagonal();
  return flip;
}

// Columns are the OPENGL camera axes expressed in simulator camera axes.
const Eigen::Matrix3d& camera_basis() {
  static const Eigen::Matrix3d basis = [] {
    Eigen::Matrix3d b;
    b << 0.0, 0.0, -1.0,  //
        1.0, 0.0, 0.0,    //
        0.0, 1.0, 0.0;
    return b;
  }();
  return basis;
}

// OPENGL camera axes expressed in a forward-left-up sensor frame.
const Eigen::Matrix3d& flu_to_gl_camera() {
  static const Eigen::Matrix3d basis = [] {
    Eigen::Matrix3d b;
    b << 0.0, 0.0, -1.0,  //
        -1.0, 0.0, 0.0,   //
        0.0, 1.0, 0.0;
    return b;
  }();
  return basis;
}

}  // namespace

std::string_view to_string(Convention convention) {
  return convention == Convention::kOpenGL ? "OPENGL" : "SIM_NATIVE";
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  if (width <= 0 || height <= 0) fail(ErrorCode::kInvalidArgument, "image size must be positive");
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    fail(ErrorCode::kInvalidArgument, "principal point outside the image");
  }
}

double CameraIntrinsics::horizontal_fov_rad() const { return 2.0 * std::atan(width / (2.0 * fx)); }
double CameraIntrinsics::vertical_fov_rad() const { return 2.0 * std::atan(height / (2.0 * fy)); }

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

double orthonormality_error(const Eigen::Matrix3d& rotation) {
  const double ortho =
      (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(rotation.determinant() - 1.0));
}

CameraPose::CameraPose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
                       Convention convention)
    : rotation_(rotation), translation_(translation), convention_(convention) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    fail(ErrorCode::kInvalidArgument, "pose contains non-finite values");
  }
  if (orthonormality_error(rotation) > kOrthonormalTolerance) {
    fail(ErrorCode::kInvalidArgument, "rotation is not orthonormal with det +1");
  }
}

CameraPose CameraPose::identity(Convention convention) {
  return CameraPose(Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(), convention);
}

CameraPose CameraPose::from_matrix(const Eigen::Matrix4d& m, Convention convention) {
  return CameraPose(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>(), convention);
}

Eigen::Matrix4d CameraPose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Eigen::Vector3d CameraPose::forward() const {
  return convention_ == Convention::kOpenGL ? Eigen::Vector3d(-rotation_.col(2))
                                            : Eigen::Vector3d(rotation_.col(0));
}

CameraPose CameraPose::compose(const CameraPose& child) const {
  if (child.convention_ != convention_) {
    fail(ErrorCode::kConvention, "cannot compose " + std::string(to_string(convention_)) +
                                     " with " + std::string(to_string(child.convention_)));
  }
  CameraPose out;
  out.rotation_ = rotation_ * child.rotation_;
  out.translation_ = rotation_ * child.translation_ + translation_;
  out.convention_ = convention_;
  return out;
}

double golden_angle(PhiMode mode) {
  return mode == PhiMode::kGolden ? kPi * (3.0 - std::sqrt(5.0)) : 3.0 * kPi - std::sqrt(5.0);
}

std::vector<SpherePoint> fibonacci_half_sphere(int n, PhiMode mode) {
  if (n < 1) fail(ErrorCode::kInvalidArgument, "fibonacci_half_sphere needs n >= 1");
  const double phi = golden_angle(mode);
  std::vector<SpherePoint> points;
  points.reserve(static_cast<std::size_t>(n));
  for (int idx = 0; idx < n; ++idx) {
    // linspace(0, 1, n) with exact endpoints.
    const double height = n == 1 ? 0.0 : (idx == n - 1 ? 1.0 : static_cast<double>(idx) / (n - 1));
    const double ring = std::sqrt(1.0 - height * height);
    SpherePoint p;
    p.x = std::cos(phi * idx) * ring;
    p.y = std::sin(phi * idx) * ring;
    p.z = height;
    const Orientation o = inward_orientation(p);
    p.pitch = o.pitch;
    p.yaw = o.yaw;
    points.push_back(p);
  }
  return points;
}

Orientation radial_orientation(const Eigen::Vector3d& direction) {
  const Eigen::Vector3d d = direction.normalized();
  Orientation o;
  o.pitch = std::asin(std::clamp(d.z(), -1.0, 1.0));
  const double rho = std::hypot(d.x(), d.y());
  if (rho == 0.0) {
    o.yaw = 0.0;
    o.degenerate = true;
    return o;
  }
  const double sign = d.x() >= 0.0 ? 1.0 : -1.0;
  o.yaw = sign * std::acos(std::clamp(d.y() / rho, -1.0, 1.0));
  return o;
}

Orientation inward_orientation(const SpherePoint& point) {
  return radial_orientation(Eigen::Vector3d(point.x, point.y, point.z));
}

LookAtResult look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                     const Eigen::Vector3d& up_hint) {
  const Eigen::Vector3d offset = target - position;
  if (!(offset.norm() > 0.0)) fail(ErrorCode::kInvalidArgument, "look_at position equals target");
  const Eigen::Vector3d forward = offset.normalized();

  LookAtResult result;
  Eigen::Vector3d right = forward.cross(up_hint);
  if (right.norm() < 1e-9 * std::max(1.0, up_hint.norm())) {
    // Fall back to the world axis least aligned with the view direction.
    result.degenerate = true;
    const std::array<Eigen::Vector3d, 3> axes = {Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                                                 Eigen::Vector3d::UnitZ()};
    Eigen::Vector3d best = axes[0];
    for (const auto& axis : axes) {
      if (std::abs(axis.dot(forward)) < std::abs(best.dot(forward))) best = axis;
    }
    right = forward.cross(best);
  }
  right.normalize();
  const Eigen::Vector3d back = -forward;
  const Eigen::Vector3d up = back.cross(right);

  Eigen::Matrix3d rotation;
  rotation.col(0) = right;
  rotation.col(1) = up;
  rotation.col(2) = back;
  result.pose = CameraPose(rotation, position, Convention::kOpenGL);
  return result;
}

CameraIntrinsics fov_to_intrinsics(double fov_deg, int width, int height) {
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) {
    fail(ErrorCode::kInvalidArgument, "fov must lie in (0, 180) degrees");
  }
  if (width <= 0 || height <= 0) fail(ErrorCode::kInvalidArgument, "image size must be positive");
  CameraIntrinsics k;
  k.fx = width / (2.0 * std::tan(deg_to_rad(fov_deg) / 2.0));
  k.fy = k.fx;
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  k.width = width;
  k.height = height;
  return k;
}

CameraPose convert_convention(const CameraPose& pose, Convention target) {
  if (pose.convention() == target) return pose;
  const Eigen::Matrix3d& f = world_flip();
  const Eigen::Matrix3d& b = camera_basis();
  if (target == Convention::kOpenGL) {
    return CameraPose(f * pose.rotation() * b, f * pose.translation(), Convention::kOpenGL);
  }
  return CameraPose(f * pose.rotation() * b.transpose(), f * pose.translation(),
                    Convention::kSimNative);
}

Eigen::Matrix3d rotation_from_rpy_deg(double roll, double pitch, double yaw) {
  const Eigen::AngleAxisd rz(deg_to_rad(yaw), Eigen::Vector3d::UnitZ());
  const Eigen::AngleAxisd ry(deg_to_rad(pitch), Eigen::Vector3d::UnitY());
  const Eigen::AngleAxisd rx(deg_to_rad(roll), Eigen::Vector3d::UnitX());
  return (rz * ry * rx).toRotationMatrix();
}

void CameraRig::add(RigEntry entry) {
  for (const auto& existing : entries_) {
    if (existing.name == entry.name) fail(ErrorCode::kInvalidArgument, "duplicate camera name " + entry.name);
    if (existing.pose.convention() != entry.pose.convention()) {
      fail(ErrorCode::kConvention, "rig mixes pose conventions");
    }
  }
  entry.intrinsics.validate();
  entries_.push_back(std::move(entry));
}

CameraRig make_exo_rig(const ExoRigParams& params) {
  if (params.n < 1) fail(ErrorCode::kInvalidArgument, "exo rig needs n >= 1");
  if (!(params.radius_m > 0.0)) fail(ErrorCode::kInvalidArgument, "exo radius must be positive");
  const CameraIntrinsics intrinsics = fov_to_intrinsics(params.fov_deg, params.width, params.height);
  CameraRig rig("sphere");
  const auto points = fibonacci_half_sphere(params.n, params.phi_mode);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Eigen::Vector3d unit(points[i].x, points[i].y, points[i].z);
    const Eigen::Vector3d position =
        params.center_m + params.radius_m * unit + Eigen::Vector3d(0.0, 0.0, params.z_offset_m);
    RigEntry entry;
    entry.name = "exo_" + std::to_string(i);
    entry.pose = look_at(position, params.center_m, Eigen::Vector3d::UnitZ()).pose;
    entry.intrinsics = intrinsics;
    entry.fov_deg = params.fov_deg;
    rig.add(std::move(entry));
  }
  return rig;
}

std::string_view to_string(EgoPreset preset) {
  switch (preset) {
    case EgoPreset::kNuScenesLike: return "NUSCENES_LIKE";
    case EgoPreset::kKitti360Like: return "KITTI360_LIKE";
    case EgoPreset::kWaymoLike: return "WAYMO_LIKE";
    case EgoPreset::kArgoverseLike: return "ARGOVERSE_LIKE";
    case EgoPreset::kInterFuserLike: return "INTERFUSER_LIKE";
  }
  return "";
}

std::string_view to_string(PresetVariant variant) {
  return variant == PresetVariant::kFov90All ? "FOV90_ALL" : "MIXED_BACK110";
}

std::string_view to_string(PhiMode mode) { return mode == PhiMode::kGolden ? "golden" : "verbatim"; }

EgoPreset parse_ego_preset(std::string_view name) {
  for (auto p : {EgoPreset::kNuScenesLike, EgoPreset::kKitti360Like, EgoPreset::kWaymoLike,
                 EgoPreset::kArgoverseLike, EgoPreset::kInterFuserLike}) {
    if (to_string(p) == name) return p;
  }
  fail(ErrorCode::kNotFound, "unknown ego preset '" + std::string(name) + "'");
}

PresetVariant parse_preset_variant(std::string_view name) {
  if (name == "FOV90_ALL") return PresetVariant::kFov90All;
  if (name == "MIXED_BACK110") return PresetVariant::kMixedBack110;
  fail(ErrorCode::kNotFound, "unknown preset variant '" + std::string(name) + "'");
}

PhiMode parse_phi_mode(std::string_view name) {
  if (name == "golden") return PhiMode::kGolden;
  if (name == "verbatim") return PhiMode::kVerbatim;
  fail(ErrorCode::kInvalidArgument, "phi_mode must be golden or verbatim");
}

std::vector<std::string> preset_names() {
  return {"NUSCENES_LIKE", "KITTI360_LIKE", "WAYMO_LIKE", "ARGOVERSE_LIKE", "INTERFUSER_LIKE"};
}

const Json& builtin_preset_document(EgoPreset preset) {
  static const std::array<Json, 5> documents = [] {
    std::array<Json, 5> docs;
    docs[0] = Json::parse(detail::kPresetNuScenesLike);
    docs[1] = Json::parse(detail::kPresetKitti360Like);
    docs[2] = Json::parse(detail::kPresetWaymoLike);
    docs[3] = Json::parse(detail::kPresetArgoverseLike);
    docs[4] = Json::parse(detail::kPresetInterFuserLike);
    return docs;
  }();
  return documents[static_cast<std::size_t>(preset)];
}

CameraRig rig_from_preset_document(const Json& document, PresetVariant variant) {
  try {
    CameraRig rig(document.at("name").get<std::string>(), document.value("version", std::string{}));
    for (const auto& e : document.at("entries")) {
      const auto t = e.at("translation_m").get<std::array<double, 3>>();
      const auto rpy = e.at("rotation_rpy_deg").get<std::array<double, 3>>();
      RigEntry entry;
      entry.name = e.at("name").get<std::string>();
      entry.fov_deg = variant == PresetVariant::kFov90All ? 90.0 : e.at("fov_deg").get<double>();
      const Eigen::Matrix3d sensor = rotation_from_rpy_deg(rpy[0], rpy[1], rpy[2]);
      entry.pose = CameraPose(sensor * flu_to_gl_camera(), Eigen::Vector3d(t[0], t[1], t[2]),
                              Convention::kOpenGL);
      entry.intrinsics =
          fov_to_intrinsics(entry.fov_deg, e.at("width").get<int>(), e.at("height").get<int>());
      rig.add(std::move(entry));
    }
    return rig;
  } catch (const Json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed preset document: ") + e.what());
  }
}

CameraRig ego_preset(EgoPreset preset, PresetVariant variant) {
  return rig_from_preset_document(builtin_preset_document(preset), variant);
}

CameraRig ego_preset(std::string_view name, PresetVariant variant) {
  return ego_preset(parse_ego_preset(name), variant);
}

}  // namespace egoexo
