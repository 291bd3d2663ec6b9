#include "egoexo/pose_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/SVD>

#include "egoexo/error.hpp"
#include "egoexo/rng.hpp"

namespace egoexo {
namespace {

constexpr double kTransformOrthoTolerance = 1e-6;
constexpr const char* kIntrinsicKeys[] = {"fl_x", "fl_y", "cx", "cy", "w", "h"};
constexpr const char* kDistortionKeys[] = {"k1", "k2", "p1", "p2"};

Json intrinsics_json(const CameraIntrinsics& k) {
  return Json{{"fl_x", k.fx}, {"fl_y", k.fy}, {"cx", k.cx}, {"cy", k.cy},
              {"w", k.width}, {"h", k.height}, {"k1", k.k1}, {"k2", k.k2},
              {"p1", k.p1},   {"p2", k.p2}};
}

Json matrix_json(const Eigen::Matrix4d& m) {
  Json rows = Json::array();
  for (int r = 0; r < 4; ++r) {
    Json row = Json::array();
    for (int c = 0; c < 4; ++c) row.push_back(static_cast<double>(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

bool intrinsics_shared(const std::vector<PoseFrame>& frames) {
  return std::all_of(frames.begin(), frames.end(),
                     [&](const PoseFrame& f) { return f.intrinsics == frames.front().intrinsics; });
}

const Json* lookup(const Json& frame, const Json& top, const char* key) {
  if (frame.contains(key)) return &frame[key];
  if (top.contains(key)) return &top[key];
  return nullptr;
}

std::string frame_label(std::size_t index, const Json& frame) {
  std::string label = "frame " + std::to_string(index);
  if (frame.is_object() && frame.contains("file_path") && frame["file_path"].is_string()) {
    label += " (" + frame["file_path"].get<std::string>() + ")";
  }
  return label;
}

// Parses a 4x4 matrix, reporting shape problems into `problems`.
std::optional<Eigen::Matrix4d> parse_matrix(const Json& value, const std::string& label,
                                            std::vector<std::string>& problems) {
  if (!value.is_array() || value.size() != 4) {
    problems.push_back(label + ": transform_matrix must be 4x4");
    return std::nullopt;
  }
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    const Json& row = value[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != 4) {
      problems.push_back(label + ": transform_matrix must be 4x4");
      return std::nullopt;
    }
    for (int c = 0; c < 4; ++c) {
      const Json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) {
        problems.push_back(label + ": transform_matrix has a non-numeric entry");
        return std::nullopt;
      }
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

}  // namespace

Json to_json(const TransformsDocument& document) {
  Json out = Json::object();
  const bool shared = !document.frames.empty() && intrinsics_shared(document.frames);
  if (shared) out.update(intrinsics_json(document.frames.front().intrinsics));
  out["camera_model"] = "OPENCV";
  Json frames = Json::array();
  for (const auto& f : document.frames) {
    Json frame{{"file_path", f.file_path}, {"transform_matrix", matrix_json(f.pose.matrix())}};
    if (f.depth_file_path) frame["depth_file_path"] = *f.depth_file_path;
    if (!shared) frame.update(intrinsics_json(f.intrinsics));
    frames.push_back(std::move(frame));
  }
  out["frames"] = std::move(frames);
  if (!document.metadata.empty()) out["metadata"] = document.metadata;
  return out;
}

std::vector<std::string> check_transforms_json(const Json& document) {
  std::vector<std::string> problems;
  if (!document.is_object()) return {"document is not a JSON object"};
  if (!document.contains("frames") || !document["frames"].is_array()) {
    return {"document has no frames array"};
  }
  std::set<std::string> paths;
  const Json& frames = document["frames"];
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Json& frame = frames[i];
    const std::string label = frame_label(i, frame);
    if (!frame.is_object()) {
      problems.push_back(label + ": not an object");
      continue;
    }
    if (!frame.contains("file_path") || !frame["file_path"].is_string()) {
      problems.push_back(label + ": missing file_path");
    } else if (!paths.insert(frame["file_path"].get<std::string>()).second) {
      problems.push_back(label + ": duplicate file_path");
    }
    for (const char* key : kIntrinsicKeys) {
      const Json* v = lookup(frame, document, key);
      if (!v) {
        problems.push_back(label + ": missing " + key);
      } else if (!v->is_number()) {
        problems.push_back(label + ": " + key + " is not a number");
      } else if (!(v->get<double>() > 0.0)) {
        problems.push_back(label + ": " + key + " must be positive");
      }
    }
    for (const char* key : kDistortionKeys) {
      const Json* v = lookup(frame, document, key);
      if (v && !v->is_number()) problems.push_back(label + ": " + key + " is not a number");
    }
    if (!frame.contains("transform_matrix")) {
      problems.push_back(label + ": missing transform_matrix");
      continue;
    }
    const auto m = parse_matrix(frame["transform_matrix"], label, problems);
    if (!m) continue;
    if (!m->allFinite()) {
      problems.push_back(label + ": transform_matrix is not finite");
      continue;
    }
    if ((*m)(3, 0) != 0.0 || (*m)(3, 1) != 0.0 || (*m)(3, 2) != 0.0 || (*m)(3, 3) != 1.0) {
      problems.push_back(label + ": last row must be [0,0,0,1]");
    }
    const double err = orthonormality_error(m->topLeftCorner<3, 3>());
    if (err > kTransformOrthoTolerance) {
      problems.push_back(label + ": rotation not orthonormal (error " + format_double(err) + ")");
    }
  }
  return problems;
}

TransformsDocument transforms_from_json(const Json& document) {
  auto problems = check_transforms_json(document);
  if (!problems.empty()) throw ValidationError("invalid transforms document", std::move(problems));

  TransformsDocument out;
  if (document.contains("metadata")) out.metadata = document["metadata"];
  const Json& frames = document["frames"];
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Json& frame = frames[i];
    PoseFrame f;
    f.file_path = frame["file_path"].get<std::string>();
    if (frame.contains("depth_file_path")) f.depth_file_path = frame["depth_file_path"].get<std::string>();
    auto num = [&](const char* key, double fallback) {
      const Json* v = lookup(frame, document, key);
      return v ? v->get<double>() : fallback;
    };
    f.intrinsics.fx = num("fl_x", 0.0);
    f.intrinsics.fy = num("fl_y", 0.0);
    f.intrinsics.cx = num("cx", 0.0);
    f.intrinsics.cy = num("cy", 0.0);
    f.intrinsics.width = static_cast<int>(num("w", 0.0));
    f.intrinsics.height = static_cast<int>(num("h", 0.0));
    f.intrinsics.k1 = num("k1", 0.0);
    f.intrinsics.k2 = num("k2", 0.0);
    f.intrinsics.p1 = num("p1", 0.0);
    f.intrinsics.p2 = num("p2", 0.0);
    std::vector<std::string> unused;
    const Eigen::Matrix4d m = *parse_matrix(frame["transform_matrix"], "", unused);
    // Documents allow 1e-6 drift; CameraPose holds 1e-9, so project onto SO(3).
    Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
    if (orthonormality_error(r) > 1e-9) {
      Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
      r = svd.matrixU() * svd.matrixV().transpose();
    }
    f.pose = CameraPose(r, m.topRightCorner<3, 1>(), Convention::kOpenGL);
    out.frames.push_back(std::move(f));
  }
  return out;
}

std::string serialize_transforms(const TransformsDocument& document) {
  std::set<std::string> paths;
  for (const auto& f : document.frames) {
    if (f.pose.convention() != Convention::kOpenGL) {
      fail(ErrorCode::kConvention, "transforms require OPENGL poses; " + f.file_path + " is " +
                                       std::string(to_string(f.pose.convention())));
    }
    if (!paths.insert(f.file_path).second) {
      fail(ErrorCode::kInvalidArgument, "duplicate file_path " + f.file_path);
    }
  }
  return canonical_dump(to_json(document));
}

void write_transforms(const TransformsDocument& document, const std::filesystem::path& out) {
  atomic_write_file(out, serialize_transforms(document));
}

void write_transforms(const std::vector<PoseFrame>& frames, const std::filesystem::path& out) {
  write_transforms(TransformsDocument{frames, Json::object()}, out);
}

TransformsDocument parse_transforms(const std::string& text) {
  Json document;
  try {
    document = Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::kParse, std::string("malformed transforms JSON: ") + e.what());
  }
  return transforms_from_json(document);
}

TransformsDocument read_transforms(const std::filesystem::path& path) {
  return transforms_from_json(read_json_file(path));
}

Json Similarity::to_json() const {
  return Json{{"scale", scale},
              {"centroid", {centroid.x(), centroid.y(), centroid.z()}},
              {"rotation", "identity"},
              {"rule", "p' = scale * (p - centroid); max camera-center norm = 1"}};
}

NormalizationResult normalize_and_center(const std::vector<PoseFrame>& frames,
                                         NormalizationScope scope) {
  if (frames.empty()) fail(ErrorCode::kInvalidArgument, "normalize_and_center needs at least one frame");

  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const int key = scope == NormalizationScope::kPerTimestep ? frames[i].timestep : 0;
    groups[key].push_back(i);
  }
  if (scope == NormalizationScope::kAcrossTimesteps) {
    int first = frames.front().timestep;
    for (const auto& f : frames) first = std::min(first, f.timestep);
    groups = {{first, std::move(groups[0])}};
  }

  NormalizationResult result;
  result.frames = frames;
  for (const auto& [key, members] : groups) {
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (std::size_t i : members) centroid += frames[i].pose.translation();
    centroid /= static_cast<double>(members.size());
    double max_norm = 0.0;
    for (std::size_t i : members) {
      max_norm = std::max(max_norm, (frames[i].pose.translation() - centroid).norm());
    }
    if (!(max_norm > 1e-12 * std::max(1.0, centroid.norm()))) {
      fail(ErrorCode::kDegenerate, "camera centers coincide; normalization scale undefined");
    }
    Similarity sim{1.0 / max_norm, centroid};
    for (std::size_t i : members) {
      const auto& pose = frames[i].pose;
      result.frames[i].pose = CameraPose(pose.rotation(), sim.apply(pose.translation()), pose.convention());
    }
    result.similarities[key] = sim;
  }
  return result;
}

SplitResult split_frames(const std::vector<PoseFrame>& frames, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorCode::kInvalidArgument, "split ratio must lie in (0, 1)");
  const std::size_t n = frames.size();
  if (n < 2) fail(ErrorCode::kInvalidArgument, "split needs at least two frames");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SeededRng rng(seed);
  // Fisher-Yates over the index list.
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);

  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  SplitResult result;
  for (std::size_t i = 0; i < n; ++i) {
    if (in_train[i]) {
      result.train.push_back(frames[i]);
      result.train_indices.push_back(i);
    } else {
      result.test.push_back(frames[i]);
      result.test_indices.push_back(i);
    }
  }
  return result;
}

}  // namespace egoexo
