#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "egoexo/json_io.hpp"
#include "egoexo/rig_geometry.hpp"

namespace egoexo {

// One image with its camera. timestep groups frames for per-timestep
// normalization and is not serialized.
struct PoseFrame {
  std::string file_path;
  CameraPose pose;
  CameraIntrinsics intrinsics;
  std::optional<std::string> depth_file_path;
  int timestep = 0;
};

// NeRFStudio-style transforms document. Intrinsics shared by every frame are
// written at the top level; otherwise each frame carries its own.
struct TransformsDocument {
  std::vector<PoseFrame> frames;
  Json metadata = Json::object();
};

Json to_json(const TransformsDocument& document);

// Validates a parsed document; collects every problem with its frame index.
// Returns the document or throws ValidationError.
TransformsDocument transforms_from_json(const Json& document);

// Non-throwing variant used by the layout validator. Each problem names the
// offending frame index and file path.
std::vector<std::string> check_transforms_json(const Json& document);

// Throws convention-error for non-OPENGL poses and invalid-argument for
// duplicate paths.
void write_transforms(const TransformsDocument& document, const std::filesystem::path& out);
void write_transforms(const std::vector<PoseFrame>& frames, const std::filesystem::path& out);
std::string serialize_transforms(const TransformsDocument& document);

TransformsDocument read_transforms(const std::filesystem::path& path);
TransformsDocument parse_transforms(const std::string& text);

enum class NormalizationScope { kPerTimestep, kAcrossTimesteps };

// p' = scale * (p - centroid). Rotation is identity.
struct Similarity {
  double scale = 1.0;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return scale * (p - centroid); }
  Eigen::Vector3d invert(const Eigen::Vector3d& p) const { return p / scale + centroid; }
  Json to_json() const;
};

struct NormalizationResult {
  std::vector<PoseFrame> frames;
  // One entry per timestep, or a single entry keyed by the first timestep
  // for kAcrossTimesteps.
  std::map<int, Similarity> similarities;
};

// Centers camera positions on their centroid and scales the largest center
// norm to 1. Throws degenerate-error if all centers in a group coincide.
NormalizationResult normalize_and_center(const std::vector<PoseFrame>& frames,
                                         NormalizationScope scope);

struct SplitResult {
  std::vector<PoseFrame> train;
  std::vector<PoseFrame> test;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

// Seeded uniform sampling without replacement; |train| = round(ratio * N).
// Frames keep their input order inside each partition.
SplitResult split_frames(const std::vector<PoseFrame>& frames, double ratio, std::uint64_t seed);

}  // namespace egoexo
