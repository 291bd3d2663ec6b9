#include "egoexo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "egoexo/error.hpp"
#include "egoexo/image_io.hpp"

namespace egoexo {
namespace fs = std::filesystem;

namespace {

void require_same(const ImageF64& a, const ImageF64& b, const char* what) {
  if (!a.same_shape(b) || a.channels() != b.channels()) fail(ErrorCode::kInvalidArgument, std::string(what) + ": shape mismatch");
  if (a.empty()) fail(ErrorCode::kInvalidArgument, std::string(what) + ": empty image");
}

void require_mask(const Mask* mask, const ImageF64& image, const char* what) {
  if (mask && (!mask->same_shape(image) || mask->channels() != 1)) {
    fail(ErrorCode::kInvalidArgument, std::string(what) + ": mask shape mismatch");
  }
}

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double x = i - kSsimWindow / 2;
    w[i] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

const std::regex kRgbName(R"(^(\d+)_rgb\.png$)");

std::map<std::string, fs::path> rgb_files(const fs::path& root) {
  if (!fs::is_directory(root)) fail(ErrorCode::kIo, root.string() + " is not a directory");
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && std::regex_match(e.path().filename().string(), kRgbName)) {
      out[fs::relative(e.path(), root).generic_string()] = e.path();
    }
  }
  return out;
}

fs::path sibling(const fs::path& rgb, const std::string& kind) {
  std::smatch m;
  const std::string name = rgb.filename().string();
  std::regex_match(name, m, kRgbName);
  return rgb.parent_path() / (m[1].str() + "_" + kind + ".png");
}

std::string scene_of(const std::string& relative) {
  const fs::path p(relative);
  fs::path prefix;
  for (const auto& part : p.parent_path()) {
    prefix /= part;
    if (part.string().rfind("spawn_point_", 0) == 0) return prefix.generic_string();
  }
  return p.parent_path().generic_string();
}

ImageMetrics score_one(const std::string& rel, const fs::path& pred, const fs::path& gt, const EvalOptions& opt) {
  ImageMetrics m;
  m.file = rel;
  m.scene = scene_of(rel);
  const ImageF64 p = to_unit(read_png_rgb8(pred));
  const ImageF64 g = to_unit(read_png_rgb8(gt));
  std::optional<Mask> mask;
  if (opt.masked) {
    const fs::path mp = sibling(pred, "mask");
    if (!fs::is_regular_file(mp)) fail(ErrorCode::kNotFound, "masked evaluation needs " + mp.string());
    mask = read_png_gray8(mp);
    std::size_t covered = 0;
    for (auto v : mask->data()) covered += v != 0;
    m.mask_coverage = mask->empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(mask->pixel_count());
  }
  const Mask* mp = mask ? &*mask : nullptr;
  m.psnr_db = psnr(p, g, mp);
  try {
    m.ssim = ssim(p, g, mp);
  } catch (const Error&) {
    if (!mp) throw;  // only a sparse mask may leave SSIM undefined
  }
  const fs::path pd = sibling(pred, "depth");
  const fs::path gd = sibling(gt, "depth");
  if (fs::is_regular_file(pd) && fs::is_regular_file(gd)) {
    m.drmse_m = depth_rmse(decode_depth_mm(read_png_gray16(pd)), decode_depth_mm(read_png_gray16(gd)), opt.clip, mp);
  }
  if (opt.lpips) m.lpips = opt.lpips->score(pred, gt);
  return m;
}

// Fixed-order means so results do not depend on the worker count.
MetricAggregate mean_of(const std::vector<const ImageMetrics*>& items) {
  MetricAggregate a;
  a.n_images = items.size();
  double psnr_sum = 0.0, ssim_sum = 0.0, d_sum = 0.0, l_sum = 0.0;
  std::size_t s_n = 0, d_n = 0, l_n = 0;
  for (const auto* m : items) {
    psnr_sum += m->psnr_db;
    if (m->ssim) ssim_sum += *m->ssim, ++s_n;
    if (m->drmse_m) d_sum += *m->drmse_m, ++d_n;
    if (m->lpips) l_sum += *m->lpips, ++l_n;
  }
  if (items.empty()) return a;
  a.psnr_db = psnr_sum / items.size();
  if (s_n) a.ssim = ssim_sum / s_n;
  if (d_n) a.drmse_m = d_sum / d_n;
  if (l_n) a.lpips = l_sum / l_n;
  return a;
}

Json aggregate_json(const MetricAggregate& a) {
  Json j{{"psnr", a.psnr_db}, {"ssim", a.ssim ? Json(*a.ssim) : Json()}, {"n_images", a.n_images}};
  if (a.drmse_m) j["drmse"] = *a.drmse_m;
  if (a.lpips) j["lpips"] = *a.lpips;
  return j;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

ImageF64 to_unit(const ImageRgb8& image) {
  ImageF64 out(image.width(), image.height(), image.channels());
  for (std::size_t i = 0; i < image.data().size(); ++i) out.data()[i] = image.data()[i] / 255.0;
  return out;
}

double psnr(const ImageF64& pred, const ImageF64& gt, const Mask* mask) {
  require_same(pred, gt, "psnr");
  require_mask(mask, pred, "psnr");
  double sse = 0.0;
  std::size_t n = 0;
  const int ch = pred.channels();
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (mask && !mask->at(x, y)) continue;
      for (int c = 0; c < ch; ++c) {
        const double d = pred.at(x, y, c) - gt.at(x, y, c);
        sse += d * d;
      }
      n += ch;
    }
  }
  if (n == 0) fail(ErrorCode::kInvalidArgument, "psnr: mask selects no pixels");
  const double mse = sse / static_cast<double>(n);
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageF64& pred, const ImageF64& gt, const Mask* mask) {
  require_same(pred, gt, "ssim");
  require_mask(mask, pred, "ssim");
  const int w = pred.width(), h = pred.height();
  if (w < kSsimWindow || h < kSsimWindow) {
    fail(ErrorCode::kInvalidArgument, "ssim: image smaller than the 11x11 window");
  }
  const auto g = gaussian_window();
  const int nx = w - kSsimWindow + 1, ny = h - kSsimWindow + 1;

  // Windows fully inside the mask, via a summed-area table of uncovered pixels.
  std::vector<char> use(static_cast<std::size_t>(nx) * ny, 1);
  if (mask) {
    std::vector<int> holes(static_cast<std::size_t>(w + 1) * (h + 1), 0);
    auto at = [&](int x, int y) -> int& { return holes[static_cast<std::size_t>(y) * (w + 1) + x]; };
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) at(x + 1, y + 1) = (mask->at(x, y) == 0) + at(x, y + 1) + at(x + 1, y) - at(x, y);
    }
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        const int k = kSsimWindow;
        use[static_cast<std::size_t>(y) * nx + x] = at(x + k, y + k) - at(x, y + k) - at(x + k, y) + at(x, y) == 0;
      }
    }
  }
  const std::size_t n_windows = static_cast<std::size_t>(std::count(use.begin(), use.end(), 1));
  if (n_windows == 0) fail(ErrorCode::kInvalidArgument, "ssim: no window lies fully inside the mask");

  double total = 0.0;
  for (int c = 0; c < pred.channels(); ++c) {
    // Separable Gaussian: horizontal pass over the five moment planes.
    const int plane = nx * h;
    std::vector<double> hx(plane), hy(plane), hxx(plane), hyy(plane), hxy(plane);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < nx; ++x) {
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (int i = 0; i < kSsimWindow; ++i) {
          const double a = pred.at(x + i, y, c), b = gt.at(x + i, y, c);
          sx += g[i] * a;
          sy += g[i] * b;
          sxx += g[i] * a * a;
          syy += g[i] * b * b;
          sxy += g[i] * a * b;
        }
        const int idx = y * nx + x;
        hx[idx] = sx, hy[idx] = sy, hxx[idx] = sxx, hyy[idx] = syy, hxy[idx] = sxy;
      }
    }
    double sum = 0.0;
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        if (!use[static_cast<std::size_t>(y) * nx + x]) continue;
        double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
        for (int j = 0; j < kSsimWindow; ++j) {
          const int idx = (y + j) * nx + x;
          mx += g[j] * hx[idx];
          my += g[j] * hy[idx];
          mxx += g[j] * hxx[idx];
          myy += g[j] * hyy[idx];
          mxy += g[j] * hxy[idx];
        }
        const double vx = mxx - mx * mx, vy = myy - my * my, cxy = mxy - mx * my;
        sum += ((2 * mx * my + kSsimC1) * (2 * cxy + kSsimC2)) /
               ((mx * mx + my * my + kSsimC1) * (vx + vy + kSsimC2));
      }
    }
    total += sum / static_cast<double>(n_windows);
  }
  return total / pred.channels();
}

double depth_rmse(const ImageF64& pred_m, const ImageF64& gt_m, std::array<double, 2> clip, const Mask* mask) {
  require_same(pred_m, gt_m, "depth_rmse");
  require_mask(mask, pred_m, "depth_rmse");
  if (!(clip[0] < clip[1])) fail(ErrorCode::kInvalidArgument, "depth_rmse: clip range is empty");
  double sse = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < gt_m.height(); ++y) {
    for (int x = 0; x < gt_m.width(); ++x) {
      if (!(gt_m.at(x, y) > 0.0) || (mask && !mask->at(x, y))) continue;
      const double d = std::clamp(pred_m.at(x, y), clip[0], clip[1]) - std::clamp(gt_m.at(x, y), clip[0], clip[1]);
      sse += d * d;
      ++n;
    }
  }
  if (n == 0) fail(ErrorCode::kInvalidArgument, "depth_rmse: no valid ground-truth pixels");
  return std::sqrt(sse / static_cast<double>(n));
}

double LpipsPlugin::score(const fs::path& pred, const fs::path& gt) const {
  std::string cmd = command;
  bool placed = false;
  for (const auto& [key, value] : {std::pair<std::string, fs::path>{"{pred}", pred}, {"{gt}", gt}}) {
    for (auto pos = cmd.find(key); pos != std::string::npos; pos = cmd.find(key)) {
      cmd.replace(pos, key.size(), shell_quote(value.string()));
      placed = true;
    }
  }
  if (!placed) cmd += " " + shell_quote(pred.string()) + " " + shell_quote(gt.string());
  std::FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) fail(ErrorCode::kIo, "lpips: cannot run " + command);
  std::string out;
  char buf[256];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  const int status = ::pclose(pipe);
  if (status != 0) fail(ErrorCode::kIo, "lpips: command failed: " + cmd);
  std::istringstream in(out);
  std::string token, last;
  while (in >> token) last = token;
  try {
    std::size_t used = 0;
    const double v = std::stod(last, &used);
    if (used != last.size() || !std::isfinite(v)) throw std::invalid_argument(last);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::kParse, "lpips: command printed no score: '" + out + "'");
  }
}

void check_holdout(const std::vector<std::string>& train_paths) {
  for (const auto& p : train_paths) {
    for (const auto& part : fs::path(p)) {
      if (part == kHoldoutTown) {
        fail(ErrorCode::kHoldout, std::string(kHoldoutTown) + " is reserved for testing but appears in training: " + p);
      }
    }
  }
}

std::vector<std::string> read_listing(const fs::path& listing) {
  std::vector<std::string> out;
  if (listing.extension() == ".json") {
    const Json doc = read_json_file(listing);
    const fs::path base = listing.parent_path();
    for (const auto& f : doc.at("frames")) {
      out.push_back((base / f.at("file_path").get<std::string>()).lexically_normal().generic_string());
    }
    return out;
  }
  std::ifstream in(listing);
  if (!in) fail(ErrorCode::kIo, "cannot read " + listing.string());
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

Json MetricReport::to_json() const {
  Json per_image = Json::array();
  for (const auto& m : images) {
    Json j{{"file", m.file}, {"scene", m.scene}, {"psnr", m.psnr_db}, {"ssim", m.ssim ? Json(*m.ssim) : Json()},
           {"mask_coverage", m.mask_coverage}};
    if (m.drmse_m) j["drmse"] = *m.drmse_m;
    if (m.lpips) j["lpips"] = *m.lpips;
    per_image.push_back(std::move(j));
  }
  Json per_scene = Json::object();
  for (const auto& [name, a] : scenes) per_scene[name] = aggregate_json(a);
  return Json{{"metadata",
               {{"split", split},
                {"masked", masked},
                {"depth_clip_m", Json::array({clip[0], clip[1]})},
                {"psnr_cap_db", kPsnrCapDb},
                {"ssim", {{"window", kSsimWindow}, {"sigma", kSsimSigma}, {"c1", kSsimC1}, {"c2", kSsimC2}}}}},
              {"mean_over_images", aggregate_json(mean_over_images)},
              {"mean_over_scenes", aggregate_json(mean_over_scenes)},
              {"scenes", per_scene},
              {"images", per_image}};
}

MetricReport evaluate_split(const fs::path& pred_dir, const fs::path& gt_dir, const EvalOptions& options) {
  if (options.train_listing) check_holdout(read_listing(*options.train_listing));
  const auto pred = rgb_files(pred_dir);
  const auto gt = rgb_files(gt_dir);
  std::vector<std::string> unmatched;
  for (const auto& [rel, _] : pred) {
    if (!gt.count(rel)) unmatched.push_back("prediction without ground truth: " + rel);
  }
  for (const auto& [rel, _] : gt) {
    if (!pred.count(rel)) unmatched.push_back("ground truth without prediction: " + rel);
  }
  if (!unmatched.empty()) throw ValidationError("prediction and ground-truth files differ", unmatched);
  if (gt.empty()) fail(ErrorCode::kNotFound, "no <idx>_rgb.png images under " + gt_dir.string());

  std::vector<std::string> keys;
  for (const auto& [rel, _] : gt) keys.push_back(rel);
  MetricReport report;
  report.split = options.split;
  report.masked = options.masked;
  report.clip = options.clip;
  report.images.resize(keys.size());

  const int workers = std::clamp(options.workers, 1, static_cast<int>(keys.size()));
  std::vector<std::exception_ptr> errors(workers);
  auto run = [&](int w) {
    try {
      for (std::size_t i = w; i < keys.size(); i += workers) {
        report.images[i] = score_one(keys[i], pred.at(keys[i]), gt.at(keys[i]), options);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  std::vector<std::thread> threads;
  for (int w = 1; w < workers; ++w) threads.emplace_back(run, w);
  run(0);
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<const ImageMetrics*> all;
  std::map<std::string, std::vector<const ImageMetrics*>> by_scene;
  for (const auto& m : report.images) {
    all.push_back(&m);
    by_scene[m.scene].push_back(&m);
  }
  report.mean_over_images = mean_of(all);
  std::vector<ImageMetrics> scene_means;
  for (const auto& [name, items] : by_scene) {
    report.scenes[name] = mean_of(items);
    const auto& a = report.scenes[name];
    scene_means.push_back({name, name, a.psnr_db, a.ssim, a.drmse_m, a.lpips, 1.0});
  }
  std::vector<const ImageMetrics*> scene_ptrs;
  for (const auto& s : scene_means) scene_ptrs.push_back(&s);
  report.mean_over_scenes = mean_of(scene_ptrs);
  report.mean_over_scenes.n_images = all.size();
  return report;
}

fs::path emit_leaderboard(const std::vector<std::pair<std::string, MetricReport>>& reports, const fs::path& path) {
  if (reports.empty()) fail(ErrorCode::kInvalidArgument, "leaderboard needs at least one method");
  std::set<std::string> names;
  for (const auto& [name, _] : reports) {
    if (!names.insert(name).second) fail(ErrorCode::kInvalidArgument, "duplicate method name: " + name);
  }
  std::vector<const std::pair<std::string, MetricReport>*> order;
  for (const auto& r : reports) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    const auto& x = a->second.mean_over_images;
    const auto& y = b->second.mean_over_images;
    if (x.psnr_db != y.psnr_db) return x.psnr_db > y.psnr_db;
    const double sx = x.ssim.value_or(-2.0), sy = y.ssim.value_or(-2.0);
    if (sx != sy) return sx > sy;
    return a->first < b->first;
  });
  const bool any_lpips = std::any_of(order.begin(), order.end(),
                                     [](const auto* r) { return r->second.mean_over_images.lpips.has_value(); });

  Json rows = Json::array();
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header{"Method", "PSNR", "SSIM"};
  if (any_lpips) header.push_back("LPIPS");
  header.insert(header.end(), {"Depth RMSE", "Images"});
  table.push_back(header);
  for (const auto* r : order) {
    const auto& a = r->second.mean_over_images;
    Json row{{"method", r->first},
             {"split", r->second.split},
             {"psnr", a.psnr_db},
             {"ssim", a.ssim ? Json(*a.ssim) : Json()},
             {"masked", r->second.masked},
             {"n_images", a.n_images},
             {"scene_mean", aggregate_json(r->second.mean_over_scenes)}};
    if (a.drmse_m) row["drmse"] = *a.drmse_m;
    if (a.lpips) row["lpips"] = *a.lpips;
    rows.push_back(std::move(row));
    std::vector<std::string> cells{r->first + (r->second.masked ? " ‡" : ""), fixed(a.psnr_db, 2),
                                   a.ssim ? fixed(*a.ssim, 3) : "-"};
    if (any_lpips) cells.push_back(a.lpips ? fixed(*a.lpips, 3) : "-");
    cells.push_back(a.drmse_m ? fixed(*a.drmse_m, 2) : "-");
    cells.push_back(std::to_string(a.n_images));
    table.push_back(std::move(cells));
  }
  write_json_file(path, Json{{"methods", rows}});

  // Column widths in code points so the ‡ marker does not skew alignment.
  auto width = [](const std::string& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
  };
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : table) {
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], width(row[i]));
  }
  std::ostringstream md;
  auto emit = [&](const std::vector<std::string>& row) {
    md << "|";
    for (std::size_t i = 0; i < row.size(); ++i) {
      const std::string pad(widths[i] - width(row[i]), ' ');
      md << " " << (i == 0 ? row[i] + pad : pad + row[i]) << " |";
    }
    md << "\n";
  };
  emit(table[0]);
  md << "|";
  for (std::size_t i = 0; i < widths.size(); ++i) md << (i == 0 ? " :" : " ") << std::string(widths[i] - 1, '-') << (i == 0 ? " |" : ": |");
  md << "\n";
  for (std::size_t r = 1; r < table.size(); ++r) emit(table[r]);
  fs::path md_path = path;
  md_path.replace_extension(".md");
  atomic_write_file(md_path, md.str());
  return md_path;
}

}  // namespace egoexo
