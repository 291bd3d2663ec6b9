#include <cmath>
#include <numbers>
#include <set>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <doctest.h>

#include "egoexo/error.hpp"
#include "egoexo/rig_geometry.hpp"
#include "test_support.hpp"

namespace egoexo {
namespace {

using BigFloat = boost::multiprecision::cpp_bin_float_50;
constexpr double kPi = std::numbers::pi;

struct Point3 {
  double x, y, z;
};

// Step-by-step half-sphere Fibonacci lattice evaluated in
// 50-digit arithmetic. The loop height and the y coordinate are kept
// distinct, so the height is what lands in z.
std::vector<Point3> reference_half_sphere(int n, bool verbatim_phi) {
  const BigFloat pi = boost::math::constants::pi<BigFloat>();
  const BigFloat phi = verbatim_phi ? BigFloat(3) * pi - sqrt(BigFloat(5)) : pi * (BigFloat(3) - sqrt(BigFloat(5)));
  std::vector<BigFloat> ys;
  for (int i = 0; i < n; ++i) ys.push_back(n == 1 ? BigFloat(0) : BigFloat(i) / BigFloat(n - 1));
  std::vector<Point3> points;
  int idx = 0;
  for (const BigFloat& y : ys) {
    const BigFloat px = cos(phi * idx) * sqrt(1 - y * y);
    const BigFloat py = sin(phi * idx) * sqrt(1 - y * y);
    const BigFloat pz = y;
    points.push_back({px.convert_to<double>(), py.convert_to<double>(), pz.convert_to<double>()});
    ++idx;
  }
  return points;
}

double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

// Basis change written axis by axis: simulator world vectors map to OPENGL
// world by negating y; OPENGL camera X, Y, Z are the simulator right, up and
// backward axes.
CameraPose reference_sim_to_gl(const CameraPose& sim) {
  auto flip = [](const Eigen::Vector3d& v) { return Eigen::Vector3d(v.x(), -v.y(), v.z()); };
  const Eigen::Matrix3d& r = sim.rotation();
  Eigen::Matrix3d out;
  out.col(0) = flip(r.col(1));
  out.col(1) = flip(r.col(2));
  out.col(2) = -flip(r.col(0));
  return CameraPose(out, flip(sim.translation()), Convention::kOpenGL);
}

TEST_CASE("fibonacci_half_sphere endpoints for n=2") {
  const auto pts = fibonacci_half_sphere(2);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].x == 1.0);
  CHECK(pts[0].y == 0.0);
  CHECK(pts[0].z == 0.0);
  CHECK(pts[1].x == doctest::Approx(0.0));
  CHECK(pts[1].y == doctest::Approx(0.0));
  CHECK(pts[1].z == 1.0);
}

TEST_CASE("fibonacci_half_sphere matches the high-precision transcription") {
  for (bool verbatim : {false, true}) {
    const auto pts = fibonacci_half_sphere(5, verbatim ? PhiMode::kVerbatim : PhiMode::kGolden);
    const auto ref = reference_half_sphere(5, verbatim);
    REQUIRE(pts.size() == 5);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(std::abs(pts[i].x - ref[i].x) < 1e-15);
      CHECK(std::abs(pts[i].y - ref[i].y) < 1e-15);
      CHECK(std::abs(pts[i].z - ref[i].z) < 1e-15);
    }
  }
}

TEST_CASE("fibonacci_half_sphere unit norm and half sphere for many n") {
  for (int n : {1, 2, 3, 7, 100, 1000, 1777}) {
    for (auto mode : {PhiMode::kGolden, PhiMode::kVerbatim}) {
      const auto pts = fibonacci_half_sphere(n, mode);
      REQUIRE(pts.size() == static_cast<std::size_t>(n));
      for (const auto& p : pts) {
        CHECK(std::abs(std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z) - 1.0) < 1e-12);
        CHECK(p.z >= 0.0);
      }
      CHECK(pts.front().z == 0.0);
      if (n >= 2) CHECK(pts.back().z == 1.0);
    }
  }
  CHECK(fibonacci_half_sphere(1)[0].z == 0.0);
}

TEST_CASE("fibonacci_half_sphere rejects n = 0") {
  CHECK_THROWS_AS(fibonacci_half_sphere(0), Error);
}

TEST_CASE("golden mode covers the sphere more evenly than the verbatim constant") {
  // Smallest pairwise distance is a coverage proxy.
  auto min_gap = [](const std::vector<SpherePoint>& pts) {
    double best = 10.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        best = std::min(best, std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y, pts[i].z - pts[j].z));
      }
    }
    return best;
  };
  CHECK(golden_angle(PhiMode::kGolden) == doctest::Approx(2.399963));
  CHECK(golden_angle(PhiMode::kVerbatim) == doctest::Approx(7.1888).epsilon(1e-4));
  CHECK(min_gap(fibonacci_half_sphere(100, PhiMode::kGolden)) >
        min_gap(fibonacci_half_sphere(100, PhiMode::kVerbatim)));
}

TEST_CASE("inward_orientation examples") {
  SUBCASE("(1,0,0)") {
    const auto o = inward_orientation({1, 0, 0});
    CHECK(o.pitch == 0.0);
    CHECK(o.yaw == doctest::Approx(kPi / 2).epsilon(1e-15));
    CHECK_FALSE(o.degenerate);
  }
  SUBCASE("pole") {
    const auto o = inward_orientation({0, 0, 1});
    CHECK(o.pitch == doctest::Approx(kPi / 2));
    CHECK(o.yaw == 0.0);
    CHECK(o.degenerate);
  }
  SUBCASE("(0,1,0) uses sign(0) = +1") {
    const auto o = inward_orientation({0, 1, 0});
    CHECK(o.pitch == 0.0);
    CHECK(o.yaw == 0.0);
    CHECK_FALSE(o.degenerate);
  }
  SUBCASE("negative x flips yaw") {
    const auto o = inward_orientation({-1, 0, 0});
    CHECK(o.yaw == doctest::Approx(-kPi / 2));
  }
}

TEST_CASE("fov_to_intrinsics") {
  SUBCASE("90 degrees") {
    const auto k = fov_to_intrinsics(90, 800, 600);
    CHECK(k.fx == doctest::Approx(400.0).epsilon(1e-15));
    CHECK(k.fy == k.fx);
    CHECK(k.cx == 400.0);
    CHECK(k.cy == 300.0);
    CHECK(k.k1 == 0.0);
  }
  SUBCASE("110 degrees against a 50-digit evaluation") {
    const BigFloat pi = boost::math::constants::pi<BigFloat>();
    const double expected = (BigFloat(800) / tan(BigFloat(55) * pi / 180)).convert_to<double>();
    const auto k = fov_to_intrinsics(110, 1600, 928);
    CHECK(std::abs(k.fx - expected) <= 2 * std::abs(std::nextafter(expected, 0.0) - expected));
  }
  SUBCASE("near 180 stays finite") {
    const auto k = fov_to_intrinsics(179.9, 100, 100);
    CHECK(std::isfinite(k.fx));
    CHECK(k.fx > 0.0);
  }
  SUBCASE("out of range") {
    CHECK_THROWS_AS(fov_to_intrinsics(0, 10, 10), Error);
    CHECK_THROWS_AS(fov_to_intrinsics(180, 10, 10), Error);
    CHECK_THROWS_AS(fov_to_intrinsics(-5, 10, 10), Error);
  }
  SUBCASE("strictly decreasing in fov") {
    double last = std::numeric_limits<double>::infinity();
    for (double fov = 1.0; fov < 180.0; fov += 0.5) {
      const double fx = fov_to_intrinsics(fov, 640, 480).fx;
      CHECK(fx < last);
      last = fx;
    }
  }
}

TEST_CASE("convert_convention") {
  SUBCASE("identity simulator pose looks along world forward") {
    const auto gl = convert_convention(CameraPose::identity(Convention::kSimNative), Convention::kOpenGL);
    CHECK(gl.convention() == Convention::kOpenGL);
    const Eigen::Vector3d minus_z = -gl.rotation().col(2);
    CHECK((minus_z - Eigen::Vector3d::UnitX()).norm() < 1e-15);
  }
  SUBCASE("random poses match axis-by-axis basis change and round trip") {
    SeededRng rng(11);
    for (int i = 0; i < 200; ++i) {
      const auto sim = testing::random_pose(rng, Convention::kSimNative);
      const auto gl = convert_convention(sim, Convention::kOpenGL);
      const auto ref = reference_sim_to_gl(sim);
      CHECK((gl.rotation() - ref.rotation()).cwiseAbs().maxCoeff() < 1e-15);
      CHECK((gl.translation() - ref.translation()).cwiseAbs().maxCoeff() < 1e-15);
      CHECK(orthonormality_error(gl.rotation()) < 1e-12);
      const auto back = convert_convention(gl, Convention::kSimNative);
      CHECK((back.rotation() - sim.rotation()).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((back.translation() - sim.translation()).cwiseAbs().maxCoeff() < 1e-12);
      // Optical axis is preserved as a world direction (up to the y flip).
      const Eigen::Vector3d f_sim = sim.forward();
      CHECK((gl.forward() - Eigen::Vector3d(f_sim.x(), -f_sim.y(), f_sim.z())).norm() < 1e-12);
    }
  }
  SUBCASE("same convention is a no-op") {
    SeededRng rng(3);
    const auto p = testing::random_pose(rng, Convention::kOpenGL);
    CHECK(convert_convention(p, Convention::kOpenGL) == p);
  }
}

TEST_CASE("CameraPose rejects bad rotations and mixed composition") {
  Eigen::Matrix3d reflect = Eigen::Matrix3d::Identity();
  reflect(0, 0) = -1.0;
  CHECK_THROWS_AS(CameraPose(reflect, Eigen::Vector3d::Zero(), Convention::kOpenGL), Error);
  Eigen::Matrix3d scaled = 1.01 * Eigen::Matrix3d::Identity();
  CHECK_THROWS_AS(CameraPose(scaled, Eigen::Vector3d::Zero(), Convention::kOpenGL), Error);
  const auto a = CameraPose::identity(Convention::kOpenGL);
  const auto b = CameraPose::identity(Convention::kSimNative);
  try {
    a.compose(b);
    FAIL("expected convention error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConvention);
  }
}

TEST_CASE("look_at") {
  SUBCASE("straight down the z axis") {
    const auto r = look_at({0, 0, 5}, {0, 0, 0}, {0, 1, 0});
    CHECK_FALSE(r.degenerate);
    CHECK((r.pose.forward() - Eigen::Vector3d(0, 0, -1)).norm() < 1e-15);
    CHECK(r.pose.rotation().col(1).dot(Eigen::Vector3d::UnitY()) == doctest::Approx(1.0));
  }
  SUBCASE("random configurations are proper rotations") {
    SeededRng rng(5);
    for (int i = 0; i < 500; ++i) {
      const Eigen::Vector3d p(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
      const Eigen::Vector3d t(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
      const auto r = look_at(p, t);
      CHECK(orthonormality_error(r.pose.rotation()) < 1e-12);
      CHECK(angle_between(r.pose.forward(), t - p) < 1e-12);
      // +Y leans toward the hint.
      CHECK(r.pose.rotation().col(1).z() >= -1e-12);
    }
  }
  SUBCASE("coincident points") { CHECK_THROWS_AS(look_at({1, 2, 3}, {1, 2, 3}), Error); }
  SUBCASE("parallel up hint falls back") {
    const auto r = look_at({0, 0, 10}, {0, 0, 0}, {0, 0, 1});
    CHECK(r.degenerate);
    CHECK(orthonormality_error(r.pose.rotation()) < 1e-12);
    CHECK((r.pose.forward() - Eigen::Vector3d(0, 0, -1)).norm() < 1e-15);
  }
}

TEST_CASE("make_exo_rig geometry") {
  SUBCASE("static dataset sphere") {
    const auto rig = make_exo_rig(100, 10.0, 0.0, Eigen::Vector3d::Zero(), 90, 800, 600);
    CHECK(rig.size() == 100);
    std::set<std::string> names;
    for (const auto& e : rig.entries()) {
      names.insert(e.name);
      CHECK(e.fov_deg == 90.0);
      CHECK(e.intrinsics.fx == doctest::Approx(400.0));
      CHECK(e.intrinsics.width == 800);
      CHECK(e.intrinsics.height == 600);
      CHECK(std::abs(e.pose.translation().norm() - 10.0) < 1e-9);
      CHECK(angle_between(e.pose.forward(), -e.pose.translation()) < 1e-6);
      CHECK(e.pose.translation().z() >= 0.0);
    }
    CHECK(names.size() == 100);
  }
  SUBCASE("dynamic dataset sphere") {
    const auto rig = make_exo_rig(10, 10.0, 0.0, Eigen::Vector3d::Zero(), 90, 128, 98);
    CHECK(rig.size() == 10);
    CHECK(rig[0].intrinsics.width == 128);
    CHECK(rig[0].intrinsics.height == 98);
  }
  SUBCASE("single camera shifted and scaled") {
    const Eigen::Vector3d center(2, 3, 0);
    const auto rig = make_exo_rig(1, 5.0, 0.0, center, 90, 64, 48);
    REQUIRE(rig.size() == 1);
    CHECK((rig[0].pose.translation() - Eigen::Vector3d(7, 3, 0)).norm() < 1e-12);
    CHECK(angle_between(rig[0].pose.forward(), center - rig[0].pose.translation()) < 1e-12);
  }
  SUBCASE("z offset moves cameras but keeps them aimed at the center") {
    const Eigen::Vector3d center(1, -1, 0.5);
    const auto rig = make_exo_rig(ExoRigParams{20, 8.0, 1.5, center, 90, 64, 48, PhiMode::kGolden});
    const auto pts = fibonacci_half_sphere(20);
    for (std::size_t i = 0; i < rig.size(); ++i) {
      const Eigen::Vector3d before = rig[i].pose.translation() - Eigen::Vector3d(0, 0, 1.5);
      CHECK(std::abs((before - center).norm() - 8.0) < 1e-9);
      CHECK((before - center - 8.0 * Eigen::Vector3d(pts[i].x, pts[i].y, pts[i].z)).norm() < 1e-12);
      CHECK(angle_between(rig[i].pose.forward(), center - rig[i].pose.translation()) < 1e-6);
    }
  }
  SUBCASE("invalid radius") {
    CHECK_THROWS_AS(make_exo_rig(10, 0.0, 0.0, Eigen::Vector3d::Zero(), 90, 64, 48), Error);
    CHECK_THROWS_AS(make_exo_rig(10, -1.0, 0.0, Eigen::Vector3d::Zero(), 90, 64, 48), Error);
  }
}

TEST_CASE("ego presets") {
  SUBCASE("nuscenes mixed variant") {
    const auto rig = ego_preset(EgoPreset::kNuScenesLike, PresetVariant::kMixedBack110);
    REQUIRE(rig.size() == 7);
    CHECK(rig.version() == "1");
    int wide = 0;
    for (const auto& e : rig.entries()) {
      if (e.fov_deg == 110.0) ++wide;
      else CHECK(e.fov_deg == 90.0);
    }
    CHECK(wide == 1);
    CHECK(rig[6].fov_deg == 110.0);
  }
  SUBCASE("nuscenes uniform variant") {
    const auto rig = ego_preset("NUSCENES_LIKE", PresetVariant::kFov90All);
    REQUIRE(rig.size() == 7);
    for (const auto& e : rig.entries()) CHECK(e.fov_deg == 90.0);
  }
  SUBCASE("front camera looks forward, nominal yaws") {
    const auto rig = ego_preset(EgoPreset::kNuScenesLike, PresetVariant::kMixedBack110);
    CHECK((rig[0].pose.forward() - Eigen::Vector3d::UnitX()).norm() < 1e-12);
    const double yaw_left = std::atan2(rig[1].pose.forward().y(), rig[1].pose.forward().x());
    CHECK(yaw_left == doctest::Approx(55.0 * kPi / 180.0));
    const double yaw_back = std::atan2(rig[5].pose.forward().y(), rig[5].pose.forward().x());
    CHECK(std::abs(yaw_back) == doctest::Approx(kPi));
    // Image up is world up for level cameras.
    CHECK(rig[0].pose.rotation().col(1).z() == doctest::Approx(1.0));
  }
  SUBCASE("all presets load") {
    for (const auto& name : preset_names()) {
      for (auto v : {PresetVariant::kFov90All, PresetVariant::kMixedBack110}) {
        const auto rig = ego_preset(name, v);
        CHECK(rig.size() > 0);
        CHECK(rig.name() == name);
      }
    }
  }
  SUBCASE("unknown preset") {
    try {
      ego_preset("TESLA_LIKE", PresetVariant::kFov90All);
      FAIL("expected not-found");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNotFound);
    }
  }
}

TEST_CASE("CameraRig rejects duplicate names and mixed conventions") {
  CameraRig rig("r");
  RigEntry e{"a", CameraPose::identity(Convention::kOpenGL), fov_to_intrinsics(90, 10, 10), 90};
  rig.add(e);
  CHECK_THROWS_AS(rig.add(e), Error);
  RigEntry other{"b", CameraPose::identity(Convention::kSimNative), fov_to_intrinsics(90, 10, 10), 90};
  CHECK_THROWS_AS(rig.add(other), Error);
}

}  // namespace
}  // namespace egoexo
