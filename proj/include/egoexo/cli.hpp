#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "egoexo/json_io.hpp"
#include "egoexo/pose_io.hpp"
#include "egoexo/scene_config.hpp"

namespace egoexo {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // validation or metric failure, runtime errors
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBackendUnavailable = 3;

int exit_code_for(const std::exception& e);

// A generation plan is either one scene config (for instance a config.json
// snapshot) or {seed, defaults, scenes:[overrides]}. Overrides are merged onto
// defaults; an override may list "spawn_points" to expand into one scene per
// point. Scenes without an explicit seed get mix_seed(seed, scene index).
std::vector<SceneConfig> generation_plan_from_json(const Json& plan, const std::filesystem::path& base_dir = {});
// path may also name a bundled plan ("static", "dynamic", ...).
std::vector<SceneConfig> load_generation_plan(const std::string& path_or_name);

// Directory holding the bundled plans; EGOEXO_CONFIG_DIR overrides it.
std::filesystem::path bundled_config_dir();
std::vector<std::string> bundled_plan_names();

struct GenerateOptions {
  std::string backend = "mock";
  bool overwrite = false;
  int workers = 1;  // scenes in flight
};

// Runs every scene; one backend instance per worker. Returns committed scene
// directories in plan order. The first failure is rethrown after all workers
// stop; scenes that committed before it stay on disk.
std::vector<std::filesystem::path> generate_dataset(const std::vector<SceneConfig>& plan,
                                                    const std::filesystem::path& out_dir,
                                                    const GenerateOptions& options);

// --- post-processing --------------------------------------------------------
// Each operation walks every camera group (nuscenes, sphere) under root and
// writes next to the originals in a suffixed directory, so the original
// layout keeps validating. All return the written files.

// <group>/transforms_normalized/{transforms.json, similarity.json}. Ego and
// exo groups of one actor share a similarity so they stay registered.
std::vector<std::filesystem::path> postprocess_normalize(const std::filesystem::path& root,
                                                         NormalizationScope scope);

// <group>/transforms_split/{transforms_train.json, transforms_test.json}.
// Refuses (holdout-error, nothing written) when a training frame would come
// from the held-out town.
std::vector<std::filesystem::path> postprocess_split(const std::filesystem::path& root, double ratio,
                                                     std::uint64_t seed, const std::vector<std::string>& groups);

// <group>/sensors_vehicles/<idx>_rgb.png and <idx>_mask.png showing only
// vehicle pixels (ego included unless exclude_ego).
std::vector<std::filesystem::path> postprocess_vehicles_only(const std::filesystem::path& root, bool exclude_ego,
                                                             const std::vector<std::string>& groups);

// <group>/sensors_fov<F>/ with centered crops of every aligned image and
// <group>/transforms_fov<F>/transforms.json with the cropped intrinsics.
// Cameras already narrower than the target are skipped.
std::vector<std::filesystem::path> postprocess_crop_fov(const std::filesystem::path& root, double fov_deg,
                                                        const std::vector<std::string>& groups);

// Full command line. Output meant for the user goes to out, diagnostics to err
// and to the log.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace egoexo
