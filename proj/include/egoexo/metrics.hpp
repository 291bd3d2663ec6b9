#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "egoexo/image.hpp"
#include "egoexo/json_io.hpp"

namespace egoexo {

inline constexpr double kPsnrCapDb = 99.0;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr std::array<double, 2> kDepthClipM{0.0, 60.0};

// 8-bit image -> [0, 1].
ImageF64 to_unit(const ImageRgb8& image);

// 10 log10(1 / MSE) over all channels of the (masked) pixels; zero MSE gives
// the cap. A mask is one channel, nonzero = include. Empty mask or shape
// mismatch -> invalid-argument.
double psnr(const ImageF64& pred, const ImageF64& gt, const Mask* mask = nullptr);

// Mean local SSIM over every window position that fits inside the image
// (no padding), averaged over channels. Gaussian 11x11 window, sigma 1.5,
// inputs in [0, 1]. With a mask only windows lying fully inside it count.
double ssim(const ImageF64& pred, const ImageF64& gt, const Mask* mask = nullptr);

// Both inputs clamped to clip, then RMSE over pixels with gt > 0 (and inside
// the mask). No such pixel -> invalid-argument.
double depth_rmse(const ImageF64& pred_m, const ImageF64& gt_m, std::array<double, 2> clip = kDepthClipM,
                  const Mask* mask = nullptr);

// External LPIPS scorer. The command runs through the shell with {pred} and
// {gt} replaced by quoted paths (appended when absent) and must print the
// score as the last token on stdout.
struct LpipsPlugin {
  std::string command;
  double score(const std::filesystem::path& pred, const std::filesystem::path& gt) const;
};

struct ImageMetrics {
  std::string file;   // path relative to the split root, e.g. .../sensors/3_rgb.png
  std::string scene;  // scene key used for the per-scene mean
  double psnr_db = 0.0;
  std::optional<double> ssim;  // unset when no window fits inside the mask
  std::optional<double> drmse_m;
  std::optional<double> lpips;
  double mask_coverage = 1.0;
};

struct MetricAggregate {
  double psnr_db = 0.0;
  std::optional<double> ssim;     // mean over images that have a score
  std::optional<double> drmse_m;  // mean over images that have depth
  std::optional<double> lpips;
  std::size_t n_images = 0;
};

struct MetricReport {
  std::vector<ImageMetrics> images;  // sorted by file
  std::map<std::string, MetricAggregate> scenes;
  MetricAggregate mean_over_images;
  MetricAggregate mean_over_scenes;  // mean of the per-scene means
  std::string split = "test";
  bool masked = false;
  std::array<double, 2> clip = kDepthClipM;

  Json to_json() const;
};

struct EvalOptions {
  bool masked = false;
  std::array<double, 2> clip = kDepthClipM;
  std::optional<LpipsPlugin> lpips;
  std::string split = "test";
  // Training listing checked against the holdout town: a transforms.json or
  // a text file with one image path per line.
  std::optional<std::filesystem::path> train_listing;
  int workers = 1;
};

// Town held out for testing; it may never appear in a training listing.
inline constexpr std::string_view kHoldoutTown = "Town02";
// Throws holdout-error naming the first offending entry.
void check_holdout(const std::vector<std::string>& train_paths);
std::vector<std::string> read_listing(const std::filesystem::path& listing);

// Pairs <idx>_rgb.png files of pred_dir and gt_dir by relative path. Depth
// is scored where both sides have <idx>_depth.png. Masked mode reads coverage
// masks from <idx>_mask.png beside each prediction. Unpaired files raise a
// validation error listing them. The scene of an image is its path up to the
// spawn_point_* directory, or its parent directory outside the dataset layout.
MetricReport evaluate_split(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                            const EvalOptions& options = {});

// Writes path (JSON) and path with extension .md (markdown table), sorted by
// PSNR descending, then SSIM descending, then name. Duplicate names or an
// empty list -> invalid-argument. Returns the markdown path.
std::filesystem::path emit_leaderboard(const std::vector<std::pair<std::string, MetricReport>>& reports,
                                       const std::filesystem::path& path);

}  // namespace egoexo
