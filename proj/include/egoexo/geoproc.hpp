#pragma once

#include <cstdint>
#include <optional>
#include <set>

#include <Eigen/Core>

#include "egoexo/image.hpp"
#include "egoexo/rig_geometry.hpp"
#include "egoexo/scene_backend.hpp"

namespace egoexo {

// One colored point per pixel with depth > 0. Pixel (u, v, d) maps to the
// camera point ((u - cx) d / fx, -(v - cy) d / fy, -d). The point weight is the
// pixel luma in [0, 1].
PointCloud unproject_depth(const SensorFrame& frame, const CameraIntrinsics& intrinsics, const CameraPose& pose);

// (u, v, depth) of a world point, or nothing when it is not in front of the
// camera.
std::optional<Eigen::Vector3d> project_point(const Eigen::Vector3d& world, const CameraIntrinsics& intrinsics,
                                             const CameraPose& pose);

struct Rasterized {
  ImageRgb8 rgb;   // 3 channels, 0 where uncovered
  Mask mask;       // 1 where covered
  ImageF64 depth;  // 0 where uncovered
  double coverage() const;
};

// Z-buffered splatting. Each point lands on its nearest pixel and covers a
// square of side 2 * point_radius_px - 1 around it.
Rasterized rasterize_points(const PointCloud& cloud, const CameraIntrinsics& intrinsics, const CameraPose& pose,
                            int width, int height, int point_radius_px = 1);

struct CropResult {
  SensorFrame frame;
  CameraIntrinsics intrinsics;
};

// Width in pixels of a centered crop with the target horizontal FoV: the
// exact width 2 fx tan(target / 2) rounded to the nearest even integer.
int crop_width_for_fov(const CameraIntrinsics& intrinsics, double target_fov_deg);

// Centered crop that keeps fx, fy and shifts the principal point. The height
// keeps the source aspect ratio, also rounded to an even count. Requesting
// the source FoV returns an unchanged copy; a wider target is rejected.
CropResult crop_to_fov(const SensorFrame& frame, const CameraIntrinsics& intrinsics, double target_fov_deg);

struct VehiclePixels {
  ImageRgb8 rgb;
  Mask mask;
};

VehiclePixels extract_vehicle_pixels(const ImageRgb8& rgb, const ImageU16& instance, const std::set<int>& ids);

}  // namespace egoexo
