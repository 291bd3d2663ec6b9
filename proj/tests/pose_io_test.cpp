#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <doctest.h>

#include "egoexo/error.hpp"
#include "egoexo/pose_io.hpp"
#include "test_support.hpp"

namespace egoexo {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::vector<PoseFrame> random_frames(SeededRng& rng, int n) {
  std::vector<PoseFrame> frames;
  const auto k = fov_to_intrinsics(90, 800, 600);
  for (int i = 0; i < n; ++i) {
    frames.push_back({"images/" + std::to_string(i) + "_rgb.png",
                      testing::random_pose(rng, Convention::kOpenGL), k, std::nullopt, 0});
  }
  return frames;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::kIo;
}

TEST_CASE("write_transforms: identity pose") {
  testing::TempDir dir;
  const auto k = fov_to_intrinsics(90, 800, 600);
  write_transforms({{"0_rgb.png", CameraPose::identity(Convention::kOpenGL), k, std::nullopt, 0}},
                   dir / "transforms.json");
  const Json doc = read_json_file(dir / "transforms.json");
  CHECK(doc["fl_x"].get<double>() == doctest::Approx(400.0).epsilon(1e-15));
  CHECK(doc["w"].get<int>() == 800);
  CHECK(doc["h"].get<int>() == 600);
  const auto m = doc["frames"][0]["transform_matrix"];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) CHECK(m[r][c].get<double>() == (r == c ? 1.0 : 0.0));
  }
}

TEST_CASE("write_transforms: ego rig with mixed fov keeps per-frame intrinsics") {
  testing::TempDir dir;
  const auto rig = ego_preset(EgoPreset::kNuScenesLike, PresetVariant::kMixedBack110);
  std::vector<PoseFrame> frames;
  for (std::size_t i = 0; i < rig.size(); ++i) {
    frames.push_back({std::to_string(i) + "_rgb.png", rig[i].pose, rig[i].intrinsics, std::nullopt, 0});
  }
  write_transforms(frames, dir / "t.json");
  const auto doc = read_transforms(dir / "t.json");
  REQUIRE(doc.frames.size() == 7);
  CHECK(doc.frames[6].intrinsics == rig[6].intrinsics);
  CHECK(doc.frames[0].intrinsics == rig[0].intrinsics);
  const Json raw = read_json_file(dir / "t.json");
  CHECK_FALSE(raw.contains("fl_x"));
  CHECK(raw["frames"][6].contains("fl_x"));
}

TEST_CASE("transforms round trip is byte-identical for random poses") {
  testing::TempDir dir;
  SeededRng rng(2024);
  auto frames = random_frames(rng, 100);
  frames[3].depth_file_path = "images/3_depth.png";
  write_transforms(frames, dir / "a.json");
  const auto doc = read_transforms(dir / "a.json");
  REQUIRE(doc.frames.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK((doc.frames[i].pose.rotation() - frames[i].pose.rotation()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((doc.frames[i].pose.translation() - frames[i].pose.translation()).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(doc.frames[3].depth_file_path == std::optional<std::string>("images/3_depth.png"));
  write_transforms(doc, dir / "b.json");
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
}

TEST_CASE("read_transforms: literal two-frame file") {
  testing::TempDir dir;
  spit(dir / "t.json", R"({
    "fl_x": 100.5, "fl_y": 101.25, "cx": 32, "cy": 24, "w": 64, "h": 48,
    "frames": [
      {"file_path": "a.png", "transform_matrix": [[1,0,0,1.5],[0,1,0,-2],[0,0,1,3.25],[0,0,0,1]]},
      {"file_path": "b.png", "k1": 0.125, "transform_matrix": [[0,-1,0,0],[1,0,0,0],[0,0,1,10],[0,0,0,1]]}
    ]})");
  const auto doc = read_transforms(dir / "t.json");
  REQUIRE(doc.frames.size() == 2);
  CHECK(doc.frames[0].file_path == "a.png");
  CHECK(doc.frames[0].intrinsics.fx == 100.5);
  CHECK(doc.frames[0].intrinsics.fy == 101.25);
  CHECK(doc.frames[0].intrinsics.width == 64);
  CHECK(doc.frames[0].pose.translation() == Eigen::Vector3d(1.5, -2, 3.25));
  CHECK(doc.frames[0].pose.rotation() == Eigen::Matrix3d::Identity());
  CHECK(doc.frames[1].intrinsics.k1 == 0.125);
  CHECK(doc.frames[0].intrinsics.k1 == 0.0);
  Eigen::Matrix3d r;
  r << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK(doc.frames[1].pose.rotation() == r);
  CHECK(doc.frames[1].pose.translation() == Eigen::Vector3d(0, 0, 10));
}

TEST_CASE("read_transforms errors") {
  testing::TempDir dir;
  SUBCASE("missing fl_x") {
    spit(dir / "t.json", R"({"fl_y":1,"cx":1,"cy":1,"w":2,"h":2,
      "frames":[{"file_path":"a","transform_matrix":[[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}]})");
    try {
      read_transforms(dir / "t.json");
      FAIL("expected validation error");
    } catch (const ValidationError& e) {
      REQUIRE(e.problems().size() == 1);
      CHECK(e.problems()[0].find("fl_x") != std::string::npos);
    }
  }
  SUBCASE("malformed JSON") {
    spit(dir / "t.json", "{\"frames\": [");
    CHECK(code_of([&] { read_transforms(dir / "t.json"); }) == ErrorCode::kParse);
  }
  SUBCASE("non-orthonormal rotation names the frame") {
    spit(dir / "t.json", R"({"fl_x":1,"fl_y":1,"cx":1,"cy":1,"w":2,"h":2,
      "frames":[{"file_path":"a","transform_matrix":[[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]},
                {"file_path":"b","transform_matrix":[[1,0.2,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}]})");
    try {
      read_transforms(dir / "t.json");
      FAIL("expected validation error");
    } catch (const ValidationError& e) {
      REQUIRE(e.problems().size() == 1);
      CHECK(e.problems()[0].find("frame 1 (b)") != std::string::npos);
    }
  }
  SUBCASE("bad last row") {
    spit(dir / "t.json", R"({"fl_x":1,"fl_y":1,"cx":1,"cy":1,"w":2,"h":2,
      "frames":[{"file_path":"a","transform_matrix":[[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0.5,1]]}]})");
    CHECK(code_of([&] { read_transforms(dir / "t.json"); }) == ErrorCode::kValidation);
  }
  SUBCASE("missing file") {
    CHECK(code_of([&] { read_transforms(dir / "nope.json"); }) == ErrorCode::kIo);
  }
}

TEST_CASE("write_transforms errors") {
  testing::TempDir dir;
  const auto k = fov_to_intrinsics(90, 8, 6);
  SUBCASE("simulator-convention pose") {
    std::vector<PoseFrame> frames{{"a", CameraPose::identity(Convention::kSimNative), k, std::nullopt, 0}};
    CHECK(code_of([&] { write_transforms(frames, dir / "t.json"); }) == ErrorCode::kConvention);
    CHECK_FALSE(std::filesystem::exists(dir / "t.json"));
  }
  SUBCASE("duplicate paths") {
    std::vector<PoseFrame> frames{{"a", CameraPose::identity(Convention::kOpenGL), k, std::nullopt, 0},
                                  {"a", CameraPose::identity(Convention::kOpenGL), k, std::nullopt, 0}};
    CHECK(code_of([&] { write_transforms(frames, dir / "t.json"); }) == ErrorCode::kInvalidArgument);
  }
}

TEST_CASE("normalize_and_center") {
  const auto k = fov_to_intrinsics(90, 8, 6);
  auto frame_at = [&](Eigen::Vector3d t, int step = 0) {
    return PoseFrame{"f" + std::to_string(t.x()) + std::to_string(step),
                     CameraPose(Eigen::Matrix3d::Identity(), t, Convention::kOpenGL), k, std::nullopt, step};
  };
  SUBCASE("two cameras") {
    const auto r = normalize_and_center({frame_at({0, 0, 0}), frame_at({2, 0, 0})},
                                        NormalizationScope::kAcrossTimesteps);
    CHECK((r.frames[0].pose.translation() - Eigen::Vector3d(-1, 0, 0)).norm() < 1e-12);
    CHECK((r.frames[1].pose.translation() - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);
    REQUIRE(r.similarities.size() == 1);
    CHECK(r.similarities.begin()->second.scale == doctest::Approx(1.0));
  }
  SUBCASE("coincident cameras are degenerate") {
    CHECK(code_of([&] {
            normalize_and_center({frame_at({1, 1, 1}), frame_at({1, 1, 1})}, NormalizationScope::kPerTimestep);
          }) == ErrorCode::kDegenerate);
  }
  SUBCASE("random clouds: centroid 0, max norm 1, ratios kept, idempotent, invertible") {
    SeededRng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      auto frames = random_frames(rng, 2 + static_cast<int>(rng.index(30)));
      const auto r = normalize_and_center(frames, NormalizationScope::kAcrossTimesteps);
      Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
      double max_norm = 0.0;
      for (const auto& f : r.frames) {
        centroid += f.pose.translation();
        max_norm = std::max(max_norm, f.pose.translation().norm());
      }
      centroid /= static_cast<double>(r.frames.size());
      CHECK(centroid.norm() < 1e-9);
      CHECK(std::abs(max_norm - 1.0) < 1e-9);
      const double d01 = (frames[0].pose.translation() - frames[1].pose.translation()).norm();
      for (std::size_t i = 1; i < frames.size(); ++i) {
        const double d0i = (frames[0].pose.translation() - frames[i].pose.translation()).norm();
        const double n01 = (r.frames[0].pose.translation() - r.frames[1].pose.translation()).norm();
        const double n0i = (r.frames[0].pose.translation() - r.frames[i].pose.translation()).norm();
        CHECK(std::abs(d0i / d01 - n0i / n01) < 1e-9);
        CHECK(r.frames[i].pose.rotation() == frames[i].pose.rotation());
      }
      const auto twice = normalize_and_center(r.frames, NormalizationScope::kAcrossTimesteps);
      for (std::size_t i = 0; i < frames.size(); ++i) {
        CHECK((twice.frames[i].pose.translation() - r.frames[i].pose.translation()).norm() < 1e-9);
        const auto& sim = r.similarities.begin()->second;
        CHECK((sim.invert(r.frames[i].pose.translation()) - frames[i].pose.translation()).norm() < 1e-9);
      }
    }
  }
  SUBCASE("per-timestep groups are normalized independently") {
    const auto r = normalize_and_center(
        {frame_at({0, 0, 0}, 0), frame_at({2, 0, 0}, 0), frame_at({10, 0, 0}, 1), frame_at({14, 0, 0}, 1)},
        NormalizationScope::kPerTimestep);
    CHECK(r.similarities.size() == 2);
    CHECK(r.frames[2].pose.translation().x() == doctest::Approx(-1.0));
    CHECK(r.frames[3].pose.translation().x() == doctest::Approx(1.0));
    CHECK(r.similarities.at(1).scale == doctest::Approx(0.5));
    const auto across = normalize_and_center(r.frames, NormalizationScope::kAcrossTimesteps);
    CHECK(across.similarities.size() == 1);
  }
  SUBCASE("100-camera sphere") {
    const auto rig = make_exo_rig(100, 10.0, 0.0, Eigen::Vector3d::Zero(), 90, 64, 48);
    std::vector<PoseFrame> frames;
    for (std::size_t i = 0; i < rig.size(); ++i) {
      frames.push_back({std::to_string(i), rig[i].pose, rig[i].intrinsics, std::nullopt, 0});
    }
    const auto r = normalize_and_center(frames, NormalizationScope::kPerTimestep);
    double max_norm = 0.0;
    for (const auto& f : r.frames) {
      CHECK(f.pose.translation().norm() <= 1.0 + 1e-12);
      max_norm = std::max(max_norm, f.pose.translation().norm());
    }
    CHECK(std::abs(max_norm - 1.0) < 1e-9);
  }
}

TEST_CASE("split_frames") {
  SeededRng rng(1);
  const auto frames = random_frames(rng, 100);
  SUBCASE("80/20 partition is disjoint and exhaustive") {
    const auto s = split_frames(frames, 0.8, 0);
    CHECK(s.train.size() == 80);
    CHECK(s.test.size() == 20);
    std::set<std::string> seen;
    for (const auto& f : s.train) seen.insert(f.file_path);
    for (const auto& f : s.test) CHECK(seen.insert(f.file_path).second);
    CHECK(seen.size() == 100);
  }
  SUBCASE("deterministic per seed") {
    CHECK(split_frames(frames, 0.8, 0).test_indices == split_frames(frames, 0.8, 0).test_indices);
    CHECK(split_frames(frames, 0.8, 0).test_indices != split_frames(frames, 0.8, 1).test_indices);
  }
  SUBCASE("complementary ratios swap sizes") {
    for (double r : {0.1, 0.33, 0.5, 0.7, 0.8}) {
      for (int n : {2, 7, 50, 100}) {
        const double x = r * n;
        if (std::abs(x - std::floor(x) - 0.5) < 1e-9) continue;  // exact halves round both ways
        const std::vector<PoseFrame> sub(frames.begin(), frames.begin() + n);
        CHECK(split_frames(sub, r, 3).train.size() == split_frames(sub, 1.0 - r, 3).test.size());
      }
    }
  }
  SUBCASE("errors") {
    CHECK(code_of([&] { split_frames({frames[0]}, 0.8, 0); }) == ErrorCode::kInvalidArgument);
    CHECK(code_of([&] { split_frames(frames, 0.0, 0); }) == ErrorCode::kInvalidArgument);
    CHECK(code_of([&] { split_frames(frames, 1.0, 0); }) == ErrorCode::kInvalidArgument);
  }
}

}  // namespace
}  // namespace egoexo
