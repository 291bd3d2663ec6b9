#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "egoexo/json_io.hpp"
#include "egoexo/scene_backend.hpp"
#include "egoexo/scene_config.hpp"

namespace egoexo {

// On-disk layout:
//   root/<town>/<weather>/vehicle/spawn_point_<n>[_with_ego|_no_ego]/
//     config.json  vehicles.json
//     step_<j>/bboxes.json  step_<j>/elapsed_time.json
//     step_<j>/<actor_id>/<group>/{sensors/, transforms/transforms.json, camera_info.json}
// with group one of nuscenes, nuscenes_lidar, sphere.

inline constexpr std::string_view kEgoGroup = "nuscenes";
inline constexpr std::string_view kLidarGroup = "nuscenes_lidar";
inline constexpr std::string_view kExoGroup = "sphere";

enum class SensorKind { kRgb, kDepth, kSemantic, kInstance, kFlow, kLidar };

std::string_view to_string(SensorKind kind);  // rgb, depth, semantic_seg, ...
std::string sensor_file_name(int index, SensorKind kind);  // "<idx>_<kind>.<png|ply>"

// "" for a single capture, otherwise "with_ego" or "no_ego".
std::string capture_variant(const SceneConfig& config);
std::filesystem::path scene_directory(const std::filesystem::path& root, const SceneConfig& config);

// Writes config.json. The snapshot carries the resolved ego preset and the
// drawn start offset, so it regenerates the scene on its own.
void snapshot_config(const SceneConfig& config, const std::filesystem::path& path);

// Builds one scene in a hidden staging directory next to its final path and
// renames it into place on commit(). A writer destroyed before commit()
// removes the staging directory, so a partial scene is never visible.
class SceneWriter {
 public:
  // Throws state-error if final_dir exists and is not empty, unless
  // overwrite is set.
  SceneWriter(std::filesystem::path final_dir, bool overwrite);
  ~SceneWriter();
  SceneWriter(const SceneWriter&) = delete;
  SceneWriter& operator=(const SceneWriter&) = delete;

  const std::filesystem::path& staging_dir() const { return staging_; }
  const std::filesystem::path& final_dir() const { return final_; }

  void write_config(const SceneConfig& config);
  void write_vehicles(const std::vector<ActorInfo>& actors);
  // One step directory. Returns written paths relative to the scene root.
  std::vector<std::filesystem::path> write_capture(const CaptureBundle& bundle, const LidarConfig& lidar);

  void commit();

 private:
  std::filesystem::path final_;
  std::filesystem::path staging_;
  bool overwrite_ = false;
  bool committed_ = false;
};

// Loads the scene on the backend, records config.timesteps captures and
// commits each capture variant. Returns the committed scene directories.
std::vector<std::filesystem::path> generate_scene(Backend& backend, const SceneConfig& config,
                                                  const std::filesystem::path& root, bool overwrite);

// --- validation -------------------------------------------------------------

enum class Severity { kWarning, kError };

struct Violation {
  Severity severity = Severity::kError;
  std::string kind;  // short tag, e.g. "missing aligned sensor"
  std::filesystem::path path;
  std::string message;
};

struct LayoutReport {
  std::vector<Violation> violations;
  int scenes = 0;
  int images = 0;

  bool ok() const;  // no errors; warnings allowed
  std::size_t count(std::string_view kind) const;
  Json to_json() const;
};

// Read-only check of every scene under root. Throws io-error if root is
// missing or not a directory.
LayoutReport validate_layout(const std::filesystem::path& root);

}  // namespace egoexo
