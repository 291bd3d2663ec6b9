#include "egoexo/scene_config.hpp"

#include <set>

#include "egoexo/error.hpp"

namespace egoexo {
namespace {

void require(bool ok, const std::string& message) {
  if (!ok) fail(ErrorCode::kInvalidArgument, "scene config: " + message);
}

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      fail(ErrorCode::kInvalidArgument, "scene config: unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Json vec3(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d read_vec3(const Json& j) {
  const auto a = j.get<std::array<double, 3>>();
  return {a[0], a[1], a[2]};
}

}  // namespace

CameraRig EgoRigConfig::build() const {
  const Json& doc = document.is_null() ? builtin_preset_document(parse_ego_preset(preset)) : document;
  CameraRig base = rig_from_preset_document(doc, variant);
  if (!width && !height) return base;
  CameraRig rig(base.name(), base.version());
  for (RigEntry e : base.entries()) {
    const int w = width.value_or(e.intrinsics.width);
    const int h = height.value_or(e.intrinsics.height);
    e.intrinsics = fov_to_intrinsics(e.fov_deg, w, h);
    rig.add(std::move(e));
  }
  return rig;
}

void SceneConfig::validate() const {
  require(!town.empty(), "town must be set");
  require(n_vehicles >= 0 && n_pedestrians >= 0, "actor counts must be non-negative");
  require(spawn_point >= 0, "spawn_point must be non-negative");
  require(timesteps >= 1, "timesteps must be >= 1");
  require(tick_seconds > 0.0, "tick_seconds must be positive");
  require(start_offset_range_s[0] >= 0.0 && start_offset_range_s[0] <= start_offset_range_s[1],
          "start_offset_range_s must satisfy 0 <= min <= max");
  require(vehicle_speed_range_mps[0] >= 0.0 && vehicle_speed_range_mps[0] <= vehicle_speed_range_mps[1],
          "vehicle_speed_range_mps must satisfy 0 <= min <= max");
  require(parked_fraction >= 0.0 && parked_fraction <= 1.0, "parked_fraction must lie in [0, 1]");
  require(exo_rig.params.n >= 1, "exo_rig.n must be >= 1");
  require(exo_rig.params.radius_m > 0.0, "exo_rig.radius_m must be positive");
  require(exo_rig.params.fov_deg > 0.0 && exo_rig.params.fov_deg < 180.0, "exo_rig.fov_deg must lie in (0, 180)");
  require(exo_rig.params.width > 0 && exo_rig.params.height > 0, "exo_rig size must be positive");
  require(!ego_rig.width || *ego_rig.width > 0, "ego_rig.width must be positive");
  require(!ego_rig.height || *ego_rig.height > 0, "ego_rig.height must be positive");
  if (lidar.enabled) {
    require(lidar.channels >= 1, "lidar.channels must be >= 1");
    require(lidar.range_m > 0.0, "lidar.range_m must be positive");
    require(lidar.points_per_tick >= 0, "lidar.points_per_tick must be non-negative");
    require(lidar.lower_fov_deg <= lidar.upper_fov_deg, "lidar fov bounds out of order");
    for (double w : {lidar.intensity_vehicle, lidar.intensity_pedestrian, lidar.intensity_ground}) {
      require(w >= 0.0 && w <= 1.0, "lidar intensities must lie in [0, 1]");
    }
  }
  if (start_offset_s) require(*start_offset_s >= 0.0, "start_offset_s must be non-negative");
}

Json to_json(const SceneConfig& c) {
  Json ego{{"preset", c.ego_rig.preset}, {"variant", std::string(to_string(c.ego_rig.variant))}};
  if (c.ego_rig.width) ego["width"] = *c.ego_rig.width;
  if (c.ego_rig.height) ego["height"] = *c.ego_rig.height;
  if (!c.ego_rig.document.is_null()) ego["document"] = c.ego_rig.document;

  const auto& p = c.exo_rig.params;
  Json exo{{"n", p.n},
           {"radius_m", p.radius_m},
           {"z_offset_m", p.z_offset_m},
           {"center_m", vec3(p.center_m)},
           {"fov_deg", p.fov_deg},
           {"width", p.width},
           {"height", p.height},
           {"phi_mode", std::string(to_string(p.phi_mode))}};

  const auto& l = c.lidar;
  Json lidar{{"enabled", l.enabled},
             {"channels", l.channels},
             {"range_m", l.range_m},
             {"points_per_tick", l.points_per_tick},
             {"upper_fov_deg", l.upper_fov_deg},
             {"lower_fov_deg", l.lower_fov_deg},
             {"mount_m", vec3(l.mount_m)},
             {"intensity_vehicle", l.intensity_vehicle},
             {"intensity_pedestrian", l.intensity_pedestrian},
             {"intensity_ground", l.intensity_ground}};

  Json j{{"town", c.town},
         {"weather", c.weather},
         {"n_vehicles", c.n_vehicles},
         {"n_pedestrians", c.n_pedestrians},
         {"spawn_point", c.spawn_point},
         {"timesteps", c.timesteps},
         {"tick_seconds", c.tick_seconds},
         {"start_offset_range_s", c.start_offset_range_s},
         {"seed", c.seed},
         {"include_ego_vehicle", c.include_ego_vehicle},
         {"capture_without_ego", c.capture_without_ego},
         {"equip", c.equip == EquipPolicy::kEgoOnly ? "ego" : "all"},
         {"exclude_large_vehicles", c.exclude_large_vehicles},
         {"vehicle_speed_range_mps", c.vehicle_speed_range_mps},
         {"parked_fraction", c.parked_fraction},
         {"remove_dynamic_vehicles", c.remove_dynamic_vehicles},
         {"optical_flow", c.optical_flow},
         {"ego_rig", ego},
         {"exo_rig", exo},
         {"lidar", lidar}};
  if (c.start_offset_s) j["start_offset_s"] = *c.start_offset_s;
  return j;
}

SceneConfig scene_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) fail(ErrorCode::kInvalidArgument, "scene config must be a JSON object");
  SceneConfig c;
  try {
    reject_unknown(j,
                   {"town", "weather", "n_vehicles", "n_pedestrians", "spawn_point", "timesteps",
                    "tick_seconds", "start_offset_range_s", "seed", "include_ego_vehicle",
                    "capture_without_ego", "equip", "exclude_large_vehicles", "vehicle_speed_range_mps",
                    "parked_fraction", "remove_dynamic_vehicles", "optical_flow", "ego_rig", "exo_rig",
                    "lidar", "start_offset_s"},
                   "scene");
    read(j, "town", c.town);
    read(j, "weather", c.weather);
    read(j, "n_vehicles", c.n_vehicles);
    read(j, "n_pedestrians", c.n_pedestrians);
    read(j, "spawn_point", c.spawn_point);
    read(j, "timesteps", c.timesteps);
    read(j, "tick_seconds", c.tick_seconds);
    read(j, "start_offset_range_s", c.start_offset_range_s);
    read(j, "seed", c.seed);
    read(j, "include_ego_vehicle", c.include_ego_vehicle);
    read(j, "capture_without_ego", c.capture_without_ego);
    if (j.contains("equip")) {
      const auto e = j["equip"].get<std::string>();
      if (e == "ego") c.equip = EquipPolicy::kEgoOnly;
      else if (e == "all") c.equip = EquipPolicy::kAllVehicles;
      else fail(ErrorCode::kInvalidArgument, "scene config: equip must be 'ego' or 'all'");
    }
    read(j, "exclude_large_vehicles", c.exclude_large_vehicles);
    read(j, "vehicle_speed_range_mps", c.vehicle_speed_range_mps);
    read(j, "parked_fraction", c.parked_fraction);
    read(j, "remove_dynamic_vehicles", c.remove_dynamic_vehicles);
    read(j, "optical_flow", c.optical_flow);
    if (j.contains("start_offset_s")) c.start_offset_s = j["start_offset_s"].get<double>();

    if (j.contains("ego_rig")) {
      const Json& e = j["ego_rig"];
      reject_unknown(e, {"preset", "variant", "width", "height", "include", "document"}, "ego_rig");
      read(e, "preset", c.ego_rig.preset);
      if (e.contains("variant")) c.ego_rig.variant = parse_preset_variant(e["variant"].get<std::string>());
      if (e.contains("width")) c.ego_rig.width = e["width"].get<int>();
      if (e.contains("height")) c.ego_rig.height = e["height"].get<int>();
      if (e.contains("document")) {
        c.ego_rig.document = e["document"];
      } else if (e.contains("include")) {
        std::filesystem::path include = e["include"].get<std::string>();
        if (include.is_relative() && !base_dir.empty()) include = base_dir / include;
        c.ego_rig.document = read_json_file(include);
        c.ego_rig.preset = c.ego_rig.document.at("name").get<std::string>();
      }
    }
    if (j.contains("exo_rig")) {
      const Json& e = j["exo_rig"];
      reject_unknown(e, {"n", "radius_m", "z_offset_m", "center_m", "fov_deg", "width", "height", "phi_mode"},
                     "exo_rig");
      auto& p = c.exo_rig.params;
      read(e, "n", p.n);
      read(e, "radius_m", p.radius_m);
      read(e, "z_offset_m", p.z_offset_m);
      if (e.contains("center_m")) p.center_m = read_vec3(e["center_m"]);
      read(e, "fov_deg", p.fov_deg);
      read(e, "width", p.width);
      read(e, "height", p.height);
      if (e.contains("phi_mode")) p.phi_mode = parse_phi_mode(e["phi_mode"].get<std::string>());
    }
    if (j.contains("lidar")) {
      const Json& e = j["lidar"];
      reject_unknown(e,
                     {"enabled", "channels", "range_m", "points_per_tick", "upper_fov_deg", "lower_fov_deg",
                      "mount_m", "intensity_vehicle", "intensity_pedestrian", "intensity_ground"},
                     "lidar");
      auto& l = c.lidar;
      read(e, "enabled", l.enabled);
      read(e, "channels", l.channels);
      read(e, "range_m", l.range_m);
      read(e, "points_per_tick", l.points_per_tick);
      read(e, "upper_fov_deg", l.upper_fov_deg);
      read(e, "lower_fov_deg", l.lower_fov_deg);
      if (e.contains("mount_m")) l.mount_m = read_vec3(e["mount_m"]);
      read(e, "intensity_vehicle", l.intensity_vehicle);
      read(e, "intensity_pedestrian", l.intensity_pedestrian);
      read(e, "intensity_ground", l.intensity_ground);
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("scene config: ") + e.what());
  }
  resolve_presets(c, base_dir);
  c.validate();
  return c;
}

void resolve_presets(SceneConfig& config, const std::filesystem::path&) {
  if (config.ego_rig.document.is_null()) {
    config.ego_rig.document = builtin_preset_document(parse_ego_preset(config.ego_rig.preset));
  }
}

}  // namespace egoexo
