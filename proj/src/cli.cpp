#include "egoexo/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "egoexo/dataset_store.hpp"
#include "egoexo/error.hpp"
#include "egoexo/geoproc.hpp"
#include "egoexo/image_io.hpp"
#include "egoexo/metrics.hpp"
#include "egoexo/rng.hpp"
#include "egoexo/scene_backend.hpp"

#ifndef EGOEXO_CONFIG_DIR
#define EGOEXO_CONFIG_DIR "configs"
#endif

namespace egoexo {
namespace fs = std::filesystem;

namespace {

std::shared_ptr<spdlog::logger> g_log;

spdlog::logger& log() {
  if (!g_log) g_log = spdlog::default_logger();
  return *g_log;
}

// --- dataset walking --------------------------------------------------------

struct GroupDir {
  fs::path dir;  // .../step_<j>/<actor>/<group>
  fs::path scene;
  int step = 0;
  int actor = 0;
  std::string group;
};

const std::regex kStepName(R"(step_(\d+))");
const std::regex kActorDir(R"(\d+)");
const std::regex kRgbName(R"((\d+)_rgb\.png)");

std::vector<GroupDir> camera_groups(const fs::path& root, const std::vector<std::string>& wanted) {
  if (!fs::is_directory(root)) fail(ErrorCode::kIo, "dataset root not found: " + root.string());
  std::vector<GroupDir> out;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_directory()) continue;
    const fs::path& p = it->path();
    const std::string name = p.filename().string();
    if (name.find(".staging.") != std::string::npos) {
      it.disable_recursion_pending();
      continue;
    }
    if (std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    if (!fs::is_regular_file(p / "transforms" / "transforms.json")) continue;
    const fs::path actor = p.parent_path();
    const fs::path step = actor.parent_path();
    std::smatch m;
    const std::string step_name = step.filename().string();
    const std::string actor_name = actor.filename().string();
    if (!std::regex_match(step_name, m, kStepName) || !std::regex_match(actor_name, kActorDir)) continue;
    out.push_back({p, step.parent_path(), std::stoi(m[1]), std::stoi(actor_name), name});
    it.disable_recursion_pending();
  }
  std::sort(out.begin(), out.end(), [](const GroupDir& a, const GroupDir& b) { return a.dir < b.dir; });
  return out;
}

std::string fov_suffix(double fov_deg) {
  if (std::abs(fov_deg - std::round(fov_deg)) < 1e-9) return std::to_string(static_cast<int>(std::lround(fov_deg)));
  std::string s = format_double(fov_deg);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

std::optional<int> rgb_index(const std::string& file_path) {
  std::smatch m;
  const std::string name = fs::path(file_path).filename().string();
  if (!std::regex_match(name, m, kRgbName)) return std::nullopt;
  return std::stoi(m[1]);
}

}  // namespace

// --- exit codes -------------------------------------------------------------

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->code()) {
      case ErrorCode::kBackendUnavailable:
      case ErrorCode::kIncompatible:
        return kExitBackendUnavailable;
      case ErrorCode::kInvalidArgument:
      case ErrorCode::kParse:
        return kExitUsage;
      default:
        return kExitFailure;
    }
  }
  return kExitFailure;
}

// --- plans ------------------------------------------------------------------

fs::path bundled_config_dir() {
  if (const char* env = std::getenv("EGOEXO_CONFIG_DIR"); env && *env) return env;
  return EGOEXO_CONFIG_DIR;
}

std::vector<std::string> bundled_plan_names() {
  std::vector<std::string> names;
  const fs::path dir = bundled_config_dir();
  if (!fs::is_directory(dir)) return names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<SceneConfig> generation_plan_from_json(const Json& plan, const fs::path& base_dir) {
  if (!plan.is_object()) fail(ErrorCode::kParse, "generation plan must be a JSON object");
  std::vector<SceneConfig> out;
  if (!plan.contains("defaults") && !plan.contains("scenes")) {
    SceneConfig c = scene_config_from_json(plan, base_dir);
    resolve_presets(c, base_dir);
    c.validate();
    out.push_back(std::move(c));
    return out;
  }
  for (const auto& [key, _] : plan.items()) {
    if (key != "seed" && key != "defaults" && key != "scenes" && key != "description") {
      fail(ErrorCode::kParse, "unknown plan key '" + key + "'");
    }
  }
  const std::uint64_t seed = plan.value("seed", std::uint64_t{0});
  const Json defaults = plan.value("defaults", Json::object());
  const Json scenes = plan.value("scenes", Json::array({Json::object()}));
  if (!scenes.is_array() || scenes.empty()) fail(ErrorCode::kParse, "plan 'scenes' must be a non-empty array");

  std::vector<Json> expanded;
  for (const auto& s : scenes) {
    Json o = s;
    if (o.contains("spawn_points")) {
      const Json points = o["spawn_points"];
      o.erase("spawn_points");
      for (const auto& p : points) {
        Json one = o;
        one["spawn_point"] = p;
        expanded.push_back(one);
      }
    } else {
      expanded.push_back(o);
    }
  }
  for (std::size_t i = 0; i < expanded.size(); ++i) {
    Json merged = defaults;
    merged.merge_patch(expanded[i]);
    if (!merged.contains("seed")) merged["seed"] = mix_seed(seed, i);
    SceneConfig c = scene_config_from_json(merged, base_dir);
    resolve_presets(c, base_dir);
    c.validate();
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<SceneConfig> load_generation_plan(const std::string& path_or_name) {
  fs::path path = path_or_name;
  if (!fs::exists(path)) {
    const fs::path bundled = bundled_config_dir() / (path_or_name + ".json");
    if (!fs::exists(bundled)) fail(ErrorCode::kNotFound, "no config file or bundled plan named " + path_or_name);
    path = bundled;
  }
  return generation_plan_from_json(read_json_file(path), path.parent_path());
}

// --- generation -------------------------------------------------------------

std::vector<fs::path> generate_dataset(const std::vector<SceneConfig>& plan, const fs::path& out_dir,
                                       const GenerateOptions& options) {
  if (plan.empty()) fail(ErrorCode::kInvalidArgument, "generation plan has no scenes");
  // Two scenes mapping to one directory would overwrite each other.
  std::set<fs::path> dirs;
  for (const auto& c : plan) {
    if (!dirs.insert(scene_directory(out_dir, c)).second) {
      fail(ErrorCode::kInvalidArgument, "two scenes share the directory " + scene_directory(out_dir, c).string());
    }
  }
  // Fail on an unknown backend before anything runs.
  BackendRegistry::instance().create(options.backend);

  std::vector<std::vector<fs::path>> results(plan.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex mu;
  const auto worker = [&] {
    auto backend = BackendRegistry::instance().create(options.backend);
    while (!stop) {
      const std::size_t i = next++;
      if (i >= plan.size()) return;
      try {
        log().info("scene {}/{} resolved config: {}", i + 1, plan.size(), to_json(plan[i]).dump());
        results[i] = generate_scene(*backend, plan[i], out_dir, options.overwrite);
        for (const auto& d : results[i]) log().info("committed {}", d.string());
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first_error) first_error = std::current_exception();
        stop = true;
      }
    }
  };
  const int n = std::clamp(options.workers, 1, static_cast<int>(plan.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  std::vector<fs::path> all;
  for (auto& r : results) all.insert(all.end(), r.begin(), r.end());
  return all;
}

// --- post-processing --------------------------------------------------------

std::vector<fs::path> postprocess_normalize(const fs::path& root, NormalizationScope scope) {
  struct Source {
    GroupDir group;
    TransformsDocument doc;
    std::size_t offset = 0;
  };
  // Key: scene, actor, and the step unless normalizing across time.
  std::map<std::tuple<fs::path, int, int>, std::vector<Source>> batches;
  for (const auto& g : camera_groups(root, {std::string(kEgoGroup), std::string(kExoGroup)})) {
    const int step_key = scope == NormalizationScope::kPerTimestep ? g.step : -1;
    Source s{g, read_transforms(g.dir / "transforms" / "transforms.json"), 0};
    for (auto& f : s.doc.frames) f.timestep = g.step;
    batches[{g.scene, g.actor, step_key}].push_back(std::move(s));
  }
  if (batches.empty()) fail(ErrorCode::kNotFound, "no camera groups under " + root.string());

  std::vector<fs::path> written;
  for (auto& [key, sources] : batches) {
    std::vector<PoseFrame> frames;
    for (auto& s : sources) {
      s.offset = frames.size();
      frames.insert(frames.end(), s.doc.frames.begin(), s.doc.frames.end());
    }
    const NormalizationResult r = normalize_and_center(frames, scope);
    for (const auto& s : sources) {
      TransformsDocument out;
      out.metadata = s.doc.metadata;
      out.frames.assign(r.frames.begin() + static_cast<std::ptrdiff_t>(s.offset),
                        r.frames.begin() + static_cast<std::ptrdiff_t>(s.offset + s.doc.frames.size()));
      const Similarity& sim =
          scope == NormalizationScope::kPerTimestep ? r.similarities.at(s.group.step) : r.similarities.begin()->second;
      const fs::path dir = s.group.dir / "transforms_normalized";
      fs::create_directories(dir);
      write_transforms(out, dir / "transforms.json");
      Json sj = sim.to_json();
      sj["scope"] = scope == NormalizationScope::kPerTimestep ? "per-timestep" : "across-timesteps";
      write_json_file(dir / "similarity.json", sj);
      written.push_back(dir / "transforms.json");
      written.push_back(dir / "similarity.json");
    }
  }
  return written;
}

std::vector<fs::path> postprocess_split(const fs::path& root, double ratio, std::uint64_t seed,
                                        const std::vector<std::string>& groups) {
  const auto dirs = camera_groups(root, groups);
  if (dirs.empty()) fail(ErrorCode::kNotFound, "no camera groups under " + root.string());
  struct Pending {
    fs::path dir;
    TransformsDocument doc;
    SplitResult split;
  };
  std::vector<Pending> pending;
  std::vector<std::string> train_paths;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const fs::path dir = dirs[i].dir / "transforms_split";
    Pending p{dir, read_transforms(dirs[i].dir / "transforms" / "transforms.json"), {}};
    p.split = split_frames(p.doc.frames, ratio, mix_seed(seed, i));
    const fs::path abs = fs::absolute(dir);
    for (const auto& f : p.split.train) train_paths.push_back((abs / f.file_path).lexically_normal().string());
    pending.push_back(std::move(p));
  }
  // Before anything is written: the held-out town never contributes training frames.
  check_holdout(train_paths);

  std::vector<fs::path> written;
  for (const auto& p : pending) {
    fs::create_directories(p.dir);
    for (const auto& [name, frames] : {std::pair{"transforms_train.json", &p.split.train},
                                       std::pair{"transforms_test.json", &p.split.test}}) {
      TransformsDocument out;
      out.metadata = p.doc.metadata;
      out.metadata["split"] = {{"ratio", ratio}, {"seed", seed}};
      out.frames = *frames;
      write_transforms(out, p.dir / name);
      written.push_back(p.dir / name);
    }
  }
  return written;
}

std::vector<fs::path> postprocess_vehicles_only(const fs::path& root, bool exclude_ego,
                                                const std::vector<std::string>& groups) {
  std::map<fs::path, std::set<int>> ids_by_scene;
  std::vector<fs::path> written;
  for (const auto& g : camera_groups(root, groups)) {
    auto it = ids_by_scene.find(g.scene);
    if (it == ids_by_scene.end()) {
      std::set<int> ids;
      const Json v = read_json_file(g.scene / "vehicles.json");
      for (const auto& e : v.at("vehicles")) {
        if (exclude_ego && e.value("is_ego", false)) continue;
        ids.insert(e.at("id").get<int>());
      }
      it = ids_by_scene.emplace(g.scene, std::move(ids)).first;
    }
    const fs::path out_dir = g.dir / "sensors_vehicles";
    fs::create_directories(out_dir);
    const TransformsDocument doc = read_transforms(g.dir / "transforms" / "transforms.json");
    for (const auto& f : doc.frames) {
      const auto idx = rgb_index(f.file_path);
      if (!idx) continue;
      const fs::path sensors = g.dir / "sensors";
      const ImageRgb8 rgb = read_png_rgb8(sensors / sensor_file_name(*idx, SensorKind::kRgb));
      const ImageU16 instance = read_png_gray16(sensors / sensor_file_name(*idx, SensorKind::kInstance));
      const VehiclePixels px = extract_vehicle_pixels(rgb, instance, it->second);
      const fs::path rgb_out = out_dir / sensor_file_name(*idx, SensorKind::kRgb);
      const fs::path mask_out = out_dir / (std::to_string(*idx) + "_mask.png");
      write_png_rgb8(rgb_out, px.rgb);
      write_png_gray8(mask_out, px.mask);
      written.push_back(rgb_out);
      written.push_back(mask_out);
    }
  }
  return written;
}

std::vector<fs::path> postprocess_crop_fov(const fs::path& root, double fov_deg,
                                           const std::vector<std::string>& groups) {
  const std::string suffix = "fov" + fov_suffix(fov_deg);
  std::vector<fs::path> written;
  for (const auto& g : camera_groups(root, groups)) {
    const TransformsDocument doc = read_transforms(g.dir / "transforms" / "transforms.json");
    const fs::path sensors = g.dir / "sensors";
    const fs::path out_sensors = g.dir / ("sensors_" + suffix);
    TransformsDocument out;
    out.metadata = doc.metadata;
    out.metadata["crop_fov_deg"] = fov_deg;
    for (const auto& f : doc.frames) {
      const auto idx = rgb_index(f.file_path);
      if (!idx) continue;
      const double src_fov = f.intrinsics.horizontal_fov_rad() * 180.0 / M_PI;
      if (src_fov < fov_deg - 1e-9) {
        log().warn("{} camera {} is narrower ({:.3f} deg) than {} deg; skipped", g.dir.string(), *idx, src_fov,
                   fov_deg);
        continue;
      }
      SensorFrame frame;
      frame.rgb = read_png_rgb8(sensors / sensor_file_name(*idx, SensorKind::kRgb));
      frame.depth = decode_depth_mm(read_png_gray16(sensors / sensor_file_name(*idx, SensorKind::kDepth)));
      frame.semantic = read_png_gray16(sensors / sensor_file_name(*idx, SensorKind::kSemantic));
      frame.instance = read_png_gray16(sensors / sensor_file_name(*idx, SensorKind::kInstance));
      const fs::path flow_path = sensors / sensor_file_name(*idx, SensorKind::kFlow);
      if (fs::exists(flow_path)) frame.flow = decode_flow(read_png_rgb16(flow_path));
      const CropResult crop = crop_to_fov(frame, f.intrinsics, fov_deg);

      fs::create_directories(out_sensors);
      const auto put = [&](SensorKind kind) { return written.emplace_back(out_sensors / sensor_file_name(*idx, kind)); };
      write_png_rgb8(put(SensorKind::kRgb), crop.frame.rgb);
      write_png_gray16(put(SensorKind::kDepth), encode_depth_mm(crop.frame.depth));
      write_png_gray16(put(SensorKind::kSemantic), crop.frame.semantic);
      write_png_gray16(put(SensorKind::kInstance), crop.frame.instance);
      if (crop.frame.flow) write_png_rgb16(put(SensorKind::kFlow), encode_flow(*crop.frame.flow));

      PoseFrame pf = f;
      const std::string rel = "../sensors_" + suffix + "/";
      pf.file_path = rel + sensor_file_name(*idx, SensorKind::kRgb);
      pf.depth_file_path = rel + sensor_file_name(*idx, SensorKind::kDepth);
      pf.intrinsics = crop.intrinsics;
      out.frames.push_back(std::move(pf));
    }
    if (out.frames.empty()) continue;
    const fs::path tf = g.dir / ("transforms_" + suffix) / "transforms.json";
    fs::create_directories(tf.parent_path());
    write_transforms(out, tf);
    written.push_back(tf);
  }
  return written;
}

// --- command line -----------------------------------------------------------

namespace {

std::pair<int, int> parse_size(const std::string& s, const std::string& flag) {
  std::smatch m;
  static const std::regex re(R"((\d+)[xX](\d+))");
  if (!std::regex_match(s, m, re) || std::stoi(m[1]) <= 0 || std::stoi(m[2]) <= 0) {
    fail(ErrorCode::kInvalidArgument, flag + " expects WIDTHxHEIGHT, got '" + s + "'");
  }
  return {std::stoi(m[1]), std::stoi(m[2])};
}

Json paths_json(const std::vector<fs::path>& paths) {
  Json a = Json::array();
  for (const auto& p : paths) a.push_back(p.generic_string());
  return a;
}

std::string fmt_opt(const std::optional<double>& v, int precision) {
  if (!v) return "n/a";
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(precision);
  s << *v;
  return s.str();
}

void print_aggregate(std::ostream& out, const std::string& label, const MetricAggregate& a) {
  out << label << ": psnr " << fmt_opt(a.psnr_db, 3) << " dB, ssim " << fmt_opt(a.ssim, 4) << ", drmse "
      << fmt_opt(a.drmse_m, 4) << " m";
  if (a.lpips) out << ", lpips " << fmt_opt(a.lpips, 4);
  out << " (" << a.n_images << " images)\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  g_log = std::make_shared<spdlog::logger>("egoexo", sink);
  g_log->set_pattern("[%H:%M:%S.%e] [%l] %v");

  CLI::App app{"Synthetic ego/exo multi-view driving data: generation, post-processing, validation, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "egoexo 0.1.0");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  // generate
  struct {
    std::string config, out, backend = "mock", ego_size, exo_size;
    bool overwrite = false, json = false;
    int workers = 1;
    std::optional<int> timesteps, limit;
  } gen;
  auto* generate = app.add_subcommand("generate", "Generate a dataset from a plan or scene config");
  generate->add_option("config", gen.config, "Plan file, config.json snapshot, or bundled plan name")->required();
  generate->add_option("-o,--out", gen.out, "Dataset root")->required();
  generate->add_option("-b,--backend", gen.backend, "Scene backend")
      ->check(CLI::IsMember(BackendRegistry::instance().names()))
      ->capture_default_str();
  generate->add_flag("--overwrite", gen.overwrite, "Replace existing scene directories");
  generate->add_option("-j,--workers", gen.workers, "Scenes generated in parallel")->check(CLI::PositiveNumber);
  generate->add_option("--ego-size", gen.ego_size, "Override every ego camera resolution, WIDTHxHEIGHT");
  generate->add_option("--exo-size", gen.exo_size, "Override the exo camera resolution, WIDTHxHEIGHT");
  generate->add_option("--timesteps", gen.timesteps, "Override the trajectory length")->check(CLI::PositiveNumber);
  generate->add_option("--limit", gen.limit, "Only the first N scenes of the plan")->check(CLI::PositiveNumber);
  generate->add_flag("--json", gen.json, "Print a JSON summary");

  // postprocess
  struct {
    std::string root, scope = "per-timestep";
    std::vector<std::string> groups;
    double ratio = 0.8, fov = 70.0;
    std::uint64_t seed = 0;
    bool exclude_ego = false, json = false;
  } pp;
  auto* postprocess = app.add_subcommand("postprocess", "Derived views of an existing dataset");
  postprocess->require_subcommand(1);
  postprocess->fallthrough();
  const auto common = [&](CLI::App* sub) {
    sub->add_option("root", pp.root, "Dataset root or scene directory")->required()->check(CLI::ExistingDirectory);
    sub->add_flag("--json", pp.json, "Print written files as JSON");
  };
  auto* normalize = postprocess->add_subcommand("normalize", "Center and scale camera positions");
  common(normalize);
  normalize->add_option("--scope", pp.scope, "per-timestep or across-timesteps")
      ->check(CLI::IsMember({"per-timestep", "across-timesteps"}))
      ->capture_default_str();
  auto* split = postprocess->add_subcommand("split", "Seeded train/test split of each camera group");
  common(split);
  split->add_option("--ratio", pp.ratio, "Training fraction")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  split->add_option("--seed", pp.seed, "Split seed")->capture_default_str();
  split->add_option("--group", pp.groups, "Camera groups (default sphere)");
  auto* vehicles = postprocess->add_subcommand("vehicles-only", "Keep vehicle pixels only");
  common(vehicles);
  vehicles->add_flag("--exclude-ego", pp.exclude_ego, "Drop the capturing vehicle itself");
  vehicles->add_option("--group", pp.groups, "Camera groups (default nuscenes and sphere)");
  auto* crop = postprocess->add_subcommand("crop-fov", "Centered crop to a narrower horizontal FoV");
  common(crop);
  crop->add_option("--fov", pp.fov, "Target horizontal FoV in degrees")->capture_default_str();
  crop->add_option("--group", pp.groups, "Camera groups (default sphere)");

  // validate
  std::string validate_root;
  bool validate_json = false;
  auto* validate = app.add_subcommand("validate", "Check a dataset tree");
  validate->add_option("root", validate_root, "Dataset root or scene directory")->required();
  validate->add_flag("--json", validate_json, "Print the report as JSON");

  // evaluate
  struct {
    std::string gt, lpips, train_listing, report, leaderboard, split = "test";
    std::vector<std::string> preds;
    std::vector<double> clip;
    bool masked = false, json = false;
    int workers = 1;
  } ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
  evaluate->add_option("--gt", ev.gt, "Ground-truth directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--pred", ev.preds, "Prediction directory, optionally NAME=DIR; repeatable")->required();
  evaluate->add_flag("--masked", ev.masked, "Score only pixels covered by <idx>_mask.png");
  evaluate->add_option("--clip", ev.clip, "Depth clip range in meters: MIN MAX")->expected(2);
  evaluate->add_option("--lpips", ev.lpips, "LPIPS scorer command with {pred} and {gt} placeholders");
  evaluate->add_option("--train-listing", ev.train_listing, "Training listing checked against the holdout town");
  evaluate->add_option("--split", ev.split, "Split label stored in the report")->capture_default_str();
  evaluate->add_option("-j,--workers", ev.workers, "Images scored in parallel")->check(CLI::PositiveNumber);
  evaluate->add_option("--report", ev.report, "Write the full report(s) as JSON");
  evaluate->add_option("--leaderboard", ev.leaderboard, "Write a leaderboard JSON and markdown table");
  evaluate->add_flag("--json", ev.json, "Print the report as JSON");

  // presets
  std::string preset_name, preset_variant = "MIXED_BACK110";
  bool presets_json = false;
  auto* presets = app.add_subcommand("presets", "Bundled ego rigs and generation plans");
  presets->require_subcommand(1);
  presets->fallthrough();
  auto* presets_list = presets->add_subcommand("list", "List presets");
  presets_list->add_flag("--json", presets_json, "JSON output");
  auto* presets_show = presets->add_subcommand("show", "Show one preset");
  presets_show->add_option("name", preset_name, "Ego rig preset or plan name")->required();
  presets_show->add_option("--variant", preset_variant, "Ego rig variant")->capture_default_str();

  std::vector<const char*> argv;
  argv.push_back("egoexo");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  g_log->set_level(quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (*generate) {
      auto plan = load_generation_plan(gen.config);
      if (gen.limit && static_cast<std::size_t>(*gen.limit) < plan.size()) plan.resize(*gen.limit);
      std::optional<std::pair<int, int>> ego, exo;
      if (!gen.ego_size.empty()) ego = parse_size(gen.ego_size, "--ego-size");
      if (!gen.exo_size.empty()) exo = parse_size(gen.exo_size, "--exo-size");
      for (auto& c : plan) {
        if (ego) {
          c.ego_rig.width = ego->first;
          c.ego_rig.height = ego->second;
        }
        if (exo) {
          c.exo_rig.params.width = exo->first;
          c.exo_rig.params.height = exo->second;
        }
        if (gen.timesteps) c.timesteps = *gen.timesteps;
        c.validate();
      }
      log().info("backend {}, {} scene(s), {} worker(s), output {}", gen.backend, plan.size(), gen.workers, gen.out);
      const auto dirs = generate_dataset(plan, gen.out, {gen.backend, gen.overwrite, gen.workers});
      if (gen.json) {
        out << Json{{"backend", gen.backend}, {"scenes", paths_json(dirs)}}.dump(2) << "\n";
      } else {
        for (const auto& d : dirs) out << d.generic_string() << "\n";
      }
      return kExitOk;
    }

    if (*postprocess) {
      std::vector<fs::path> written;
      std::string op;
      if (*normalize) {
        op = "normalize";
        written = postprocess_normalize(pp.root, pp.scope == "per-timestep" ? NormalizationScope::kPerTimestep
                                                                            : NormalizationScope::kAcrossTimesteps);
      } else if (*split) {
        op = "split";
        written = postprocess_split(pp.root, pp.ratio, pp.seed,
                                    pp.groups.empty() ? std::vector<std::string>{"sphere"} : pp.groups);
      } else if (*vehicles) {
        op = "vehicles-only";
        written = postprocess_vehicles_only(
            pp.root, pp.exclude_ego, pp.groups.empty() ? std::vector<std::string>{"nuscenes", "sphere"} : pp.groups);
      } else {
        op = "crop-fov";
        written = postprocess_crop_fov(pp.root, pp.fov,
                                       pp.groups.empty() ? std::vector<std::string>{"sphere"} : pp.groups);
      }
      log().info("{}: {} file(s) written", op, written.size());
      if (pp.json) {
        out << Json{{"op", op}, {"written", paths_json(written)}}.dump(2) << "\n";
      } else {
        out << op << ": " << written.size() << " file(s) written\n";
      }
      return kExitOk;
    }

    if (*validate) {
      const LayoutReport report = validate_layout(validate_root);
      if (validate_json) {
        out << report.to_json().dump(2) << "\n";
      } else {
        for (const auto& v : report.violations) {
          out << (v.severity == Severity::kError ? "error" : "warning") << ": " << v.kind << ": "
              << v.path.generic_string() << ": " << v.message << "\n";
        }
        out << report.scenes << " scene(s), " << report.images << " image(s), " << report.violations.size()
            << " violation(s)\n";
      }
      return report.ok() ? kExitOk : kExitFailure;
    }

    if (*evaluate) {
      EvalOptions opts;
      opts.masked = ev.masked;
      if (!ev.clip.empty()) opts.clip = {ev.clip[0], ev.clip[1]};
      if (!ev.lpips.empty()) opts.lpips = LpipsPlugin{ev.lpips};
      if (!ev.train_listing.empty()) opts.train_listing = fs::path(ev.train_listing);
      opts.split = ev.split;
      opts.workers = ev.workers;
      std::vector<std::pair<std::string, MetricReport>> reports;
      for (const auto& p : ev.preds) {
        const auto eq = p.find('=');
        std::string name = eq == std::string::npos ? fs::path(p).filename().string() : p.substr(0, eq);
        const fs::path dir = eq == std::string::npos ? fs::path(p) : fs::path(p.substr(eq + 1));
        if (name.empty()) name = dir.parent_path().filename().string();
        log().info("evaluating {} ({}) against {}", name, dir.string(), ev.gt);
        reports.emplace_back(name, evaluate_split(dir, ev.gt, opts));
      }
      Json all = Json::object();
      for (const auto& [name, r] : reports) all[name] = r.to_json();
      if (!ev.report.empty()) write_json_file(ev.report, reports.size() == 1 ? reports[0].second.to_json() : all);
      if (!ev.leaderboard.empty()) {
        const fs::path md = emit_leaderboard(reports, ev.leaderboard);
        log().info("leaderboard written to {} and {}", ev.leaderboard, md.string());
      }
      if (ev.json) {
        out << (reports.size() == 1 ? reports[0].second.to_json() : all).dump(2) << "\n";
      } else {
        for (const auto& [name, r] : reports) {
          print_aggregate(out, name + (r.masked ? " (masked)" : ""), r.mean_over_images);
          print_aggregate(out, name + " per-scene mean", r.mean_over_scenes);
        }
      }
      return kExitOk;
    }

    if (*presets_list) {
      const auto rigs = preset_names();
      const auto plans = bundled_plan_names();
      if (presets_json) {
        out << Json{{"ego_rigs", rigs}, {"plans", plans}}.dump(2) << "\n";
      } else {
        out << "ego rigs:\n";
        for (const auto& r : rigs) out << "  " << r << "\n";
        out << "plans:\n";
        for (const auto& p : plans) out << "  " << p << "\n";
      }
      return kExitOk;
    }

    if (*presets_show) {
      const auto rigs = preset_names();
      if (std::find(rigs.begin(), rigs.end(), preset_name) != rigs.end()) {
        const CameraRig rig = ego_preset(preset_name, parse_preset_variant(preset_variant));
        Json cams = Json::array();
        for (const auto& e : rig.entries()) {
          cams.push_back({{"name", e.name},
                          {"fov_deg", e.fov_deg},
                          {"width", e.intrinsics.width},
                          {"height", e.intrinsics.height},
                          {"translation_m", {e.pose.translation().x(), e.pose.translation().y(),
                                             e.pose.translation().z()}}});
        }
        out << Json{{"name", rig.name()}, {"version", rig.version()}, {"variant", preset_variant}, {"cameras", cams}}
                   .dump(2)
            << "\n";
        return kExitOk;
      }
      const auto plan = load_generation_plan(preset_name);
      Json scenes = Json::array();
      for (const auto& c : plan) scenes.push_back(to_json(c));
      out << Json{{"plan", preset_name}, {"scenes", scenes}}.dump(2) << "\n";
      return kExitOk;
    }
  } catch (const std::exception& e) {
    log().error("{}", e.what());
    err.flush();
    return exit_code_for(e);
  }
  return kExitUsage;
}

}  // namespace egoexo
