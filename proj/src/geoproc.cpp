#include "egoexo/geoproc.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "egoexo/error.hpp"

namespace egoexo {
namespace {

constexpr double kFovTolerance = 1e-9;

int nearest_even(double x) { return 2 * static_cast<int>(std::lround(x / 2.0)); }

template <typename T>
Image<T> crop_plane(const Image<T>& src, int x0, int y0, int w, int h) {
  Image<T> out(w, h, src.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < src.channels(); ++c) out.at(x, y, c) = src.at(x0 + x, y0 + y, c);
    }
  }
  return out;
}

}  // namespace

PointCloud unproject_depth(const SensorFrame& frame, const CameraIntrinsics& k, const CameraPose& pose) {
  if (pose.convention() != Convention::kOpenGL) fail(ErrorCode::kConvention, "unproject_depth expects an OPENGL pose");
  if (!frame.depth.same_shape(frame.rgb)) fail(ErrorCode::kInvalidArgument, "depth and rgb planes differ in size");
  PointCloud cloud;
  for (int v = 0; v < frame.depth.height(); ++v) {
    for (int u = 0; u < frame.depth.width(); ++u) {
      const double d = frame.depth.at(u, v);
      if (!(d > 0.0)) continue;
      const Eigen::Vector3d p = pose.to_world(Eigen::Vector3d((u - k.cx) * d / k.fx, -(v - k.cy) * d / k.fy, -d));
      const std::array<std::uint8_t, 3> rgb{frame.rgb.at(u, v, 0), frame.rgb.at(u, v, 1), frame.rgb.at(u, v, 2)};
      const double luma = (0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]) / 255.0;
      cloud.points.emplace_back(p.x(), p.y(), p.z(), std::min(luma, 1.0));
      cloud.colors.push_back(rgb);
    }
  }
  return cloud;
}

std::optional<Eigen::Vector3d> project_point(const Eigen::Vector3d& world, const CameraIntrinsics& k,
                                             const CameraPose& pose) {
  const Eigen::Vector3d p = pose.to_camera(world);
  if (!(p.z() < 0.0)) return std::nullopt;
  const double depth = -p.z();
  return Eigen::Vector3d(k.cx + k.fx * p.x() / depth, k.cy - k.fy * p.y() / depth, depth);
}

double Rasterized::coverage() const {
  if (mask.empty()) return 0.0;
  std::size_t covered = 0;
  for (auto m : mask.data()) covered += m != 0;
  return static_cast<double>(covered) / static_cast<double>(mask.pixel_count());
}

Rasterized rasterize_points(const PointCloud& cloud, const CameraIntrinsics& k, const CameraPose& pose, int width,
                            int height, int point_radius_px) {
  if (pose.convention() != Convention::kOpenGL) fail(ErrorCode::kConvention, "rasterize_points expects an OPENGL pose");
  if (point_radius_px < 1) fail(ErrorCode::kInvalidArgument, "point radius must be >= 1");
  Rasterized out{ImageRgb8(width, height, 3), Mask(width, height), ImageF64(width, height)};
  ImageF64 zbuf(width, height, 1, std::numeric_limits<double>::infinity());
  const int reach = point_radius_px - 1;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto uvd = project_point(cloud.points[i].head<3>(), k, pose);
    if (!uvd) continue;
    const long pu = std::lround(uvd->x());
    const long pv = std::lround(uvd->y());
    std::array<std::uint8_t, 3> color;
    if (cloud.has_colors()) {
      color = cloud.colors[i];
    } else {
      const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(cloud.points[i].w(), 0.0, 1.0) * 255.0));
      color = {g, g, g};
    }
    for (long y = pv - reach; y <= pv + reach; ++y) {
      if (y < 0 || y >= height) continue;
      for (long x = pu - reach; x <= pu + reach; ++x) {
        if (x < 0 || x >= width) continue;
        double& z = zbuf.at(static_cast<int>(x), static_cast<int>(y));
        if (!(uvd->z() < z)) continue;
        z = uvd->z();
        out.depth.at(static_cast<int>(x), static_cast<int>(y)) = uvd->z();
        out.mask.at(static_cast<int>(x), static_cast<int>(y)) = 1;
        for (int c = 0; c < 3; ++c) out.rgb.at(static_cast<int>(x), static_cast<int>(y), c) = color[c];
      }
    }
  }
  return out;
}

int crop_width_for_fov(const CameraIntrinsics& k, double target_fov_deg) {
  const double half = target_fov_deg * std::numbers::pi / 360.0;
  return nearest_even(2.0 * k.fx * std::tan(half));
}

CropResult crop_to_fov(const SensorFrame& frame, const CameraIntrinsics& k, double target_fov_deg) {
  if (!(target_fov_deg > 0.0 && target_fov_deg < 180.0)) {
    fail(ErrorCode::kInvalidArgument, "target FoV must lie in (0, 180) degrees");
  }
  if (!frame.rgb.same_shape(k.width, k.height)) fail(ErrorCode::kInvalidArgument, "frame size differs from intrinsics");
  const double source = k.horizontal_fov_rad();
  const double target = target_fov_deg * std::numbers::pi / 180.0;
  if (std::abs(target - source) <= kFovTolerance) return {frame, k};
  if (target > source) fail(ErrorCode::kInvalidArgument, "target FoV exceeds the source FoV");

  const int w = crop_width_for_fov(k, target_fov_deg);
  const int h = std::min(k.height, nearest_even(static_cast<double>(k.height) * w / k.width));
  if (w < 2 || h < 2) fail(ErrorCode::kInvalidArgument, "crop would be empty");
  const int x0 = (k.width - w) / 2;
  const int y0 = (k.height - h) / 2;

  CropResult out;
  out.intrinsics = k;
  out.intrinsics.width = w;
  out.intrinsics.height = h;
  out.intrinsics.cx = k.cx - x0;
  out.intrinsics.cy = k.cy - y0;
  out.frame.rgb = crop_plane(frame.rgb, x0, y0, w, h);
  if (!frame.depth.empty()) out.frame.depth = crop_plane(frame.depth, x0, y0, w, h);
  if (!frame.semantic.empty()) out.frame.semantic = crop_plane(frame.semantic, x0, y0, w, h);
  if (!frame.instance.empty()) out.frame.instance = crop_plane(frame.instance, x0, y0, w, h);
  if (frame.flow) out.frame.flow = crop_plane(*frame.flow, x0, y0, w, h);
  return out;
}

VehiclePixels extract_vehicle_pixels(const ImageRgb8& rgb, const ImageU16& instance, const std::set<int>& ids) {
  if (!rgb.same_shape(instance)) fail(ErrorCode::kInvalidArgument, "rgb and instance planes differ in size");
  VehiclePixels out{ImageRgb8(rgb.width(), rgb.height(), 3), Mask(rgb.width(), rgb.height())};
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      if (!ids.count(instance.at(x, y))) continue;
      out.mask.at(x, y) = 1;
      for (int c = 0; c < 3; ++c) out.rgb.at(x, y, c) = rgb.at(x, y, c);
    }
  }
  return out;
}

}  // namespace egoexo
