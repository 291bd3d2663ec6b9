#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "egoexo/json_io.hpp"
#include "egoexo/rig_geometry.hpp"

namespace egoexo {

struct EgoRigConfig {
  std::string preset = "NUSCENES_LIKE";
  PresetVariant variant = PresetVariant::kMixedBack110;
  // Optional resolution override applied to every ego camera (FoV is kept).
  std::optional<int> width;
  std::optional<int> height;
  // Resolved preset document. Filled from the built-in preset or from an
  // "include" path when a config is loaded, and written into snapshots so a
  // dataset does not depend on the preset files that produced it.
  Json document;

  CameraRig build() const;
};

struct ExoRigConfig {
  ExoRigParams params;
  CameraRig build() const { return make_exo_rig(params); }
};

struct LidarConfig {
  bool enabled = true;
  int channels = 32;
  double range_m = 50.0;
  int points_per_tick = 4096;
  double upper_fov_deg = 10.0;
  double lower_fov_deg = -30.0;
  Eigen::Vector3d mount_m = Eigen::Vector3d(0.0, 0.0, 1.0);  // body frame
  double intensity_vehicle = 1.0;
  double intensity_pedestrian = 1.0;
  double intensity_ground = 0.5;
};

enum class EquipPolicy { kEgoOnly, kAllVehicles };

// Complete recipe for one scene. Equal configs generate byte-identical
// output on the mock backend.
struct SceneConfig {
  std::string town = "Town01";
  std::string weather = "ClearNoon";
  int n_vehicles = 20;  // traffic vehicles besides the ego vehicle
  int n_pedestrians = 20;
  int spawn_point = 0;
  int timesteps = 1;
  double tick_seconds = 0.1;
  std::array<double, 2> start_offset_range_s{1.0, 3.0};
  std::uint64_t seed = 0;
  bool include_ego_vehicle = true;
  // Also record a sibling capture with the ego vehicle removed.
  bool capture_without_ego = false;
  EquipPolicy equip = EquipPolicy::kEgoOnly;
  bool exclude_large_vehicles = true;
  std::array<double, 2> vehicle_speed_range_mps{3.0, 10.0};
  double parked_fraction = 0.25;
  bool remove_dynamic_vehicles = false;
  bool optical_flow = false;
  EgoRigConfig ego_rig;
  ExoRigConfig exo_rig;
  LidarConfig lidar;
  // Drawn warm-up offset; set by the backend at load and kept in snapshots.
  std::optional<double> start_offset_s;

  // Throws invalid-argument describing the first violated constraint.
  void validate() const;
};

Json to_json(const SceneConfig& config);

// Missing keys take defaults. Relative "include" paths resolve against
// base_dir. Unknown keys are rejected so typos do not silently vanish.
SceneConfig scene_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});

// Resolves the ego preset document if it has not been resolved yet.
void resolve_presets(SceneConfig& config, const std::filesystem::path& base_dir = {});

}  // namespace egoexo
