#include "doctest.h"
#include "test_support.hpp"

#include "semreg/common.hpp"
#include "semreg/io.hpp"
#include "semreg/raycast.hpp"

#include <filesystem>
#include <set>

using namespace semreg;

namespace {

/// Brute-force occlusion oracle: no triangle is hit strictly before the point.
bool visible(const TriangleMesh& mesh, const Vec3& eye, const Vec3& p, double tol = 1e-6) {
  const double dist = (p - eye).norm();
  const auto hit = intersect_brute_force(mesh, {eye, (p - eye) / dist});
  return hit.t >= dist - tol;
}

}  // namespace

TEST_CASE("look_at follows the x-right, y-down, z-forward convention") {
  const Pose cam = look_at(Vec3(-2, 0, 0), Vec3::Zero(), Vec3::UnitZ());
  CHECK((cam.transform_point(Vec3::Zero()) - Vec3(0, 0, 2)).norm() < 1e-12);
  // World up projects to negative image y.
  CHECK(cam.rotate(Vec3::UnitZ()).y() < -0.99);
  const Pose pole = viewpoint_pose({0, 90, 1.0}, Vec3::Zero());
  CHECK((pole.inverse().translation() - Vec3(0, 0, 1)).norm() < 1e-12);
  CHECK(std::abs(pole.rotation().norm() - 1.0) < 1e-12);
}

TEST_CASE("cube viewed face-on shows only front faces") {
  const TriangleMesh cube = make_box(Vec3(1, 1, 1));
  CameraModel cam = view_camera({0, -90, 3.0}, Vec3::Zero(), std::sqrt(3.0) / 2, 64);  // below, looking along +z
  const Vec3 eye = cam.extrinsics.inverse().translation();
  CHECK((eye - Vec3(0, 0, -3)).norm() < 1e-12);
  const auto cloud = raycast_view(cube, cam, 4);
  REQUIRE(cloud.size() > 100);
  std::size_t on_facing = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    int axis;
    p.cwiseAbs().maxCoeff(&axis);
    Vec3 outward = Vec3::Zero();
    outward[axis] = p[axis] > 0 ? 1 : -1;
    CHECK(outward.dot(eye - p) > 0.0);  // never a back face
    CHECK(cloud.normals[i].dot(eye - p) > 0.0);
    CHECK(cloud.labels[i] == 4);
    on_facing += std::abs(p.z() + 0.5) < 1e-9;
  }
  CHECK(on_facing == cloud.size());
}

TEST_CASE("icosphere views are front-facing and unoccluded") {
  const TriangleMesh sphere = make_icosphere(0.1, 3);
  std::mt19937_64 rng(41);
  for (const Viewpoint vp : {Viewpoint{0, 0, 0.5}, Viewpoint{130, 35, 0.4}, Viewpoint{275, -60, 0.8}}) {
    const auto cam = view_camera(vp, Vec3::Zero(), 0.1, 64);
    const auto cloud = raycast_view(sphere, cam, 1);
    const Vec3 eye = cam.extrinsics.inverse().translation();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      CHECK((cloud.points[i] - eye).dot(cloud.normals[i]) < 0.0);
      // The supporting facet's outward normal also faces the camera.
      std::size_t facet = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < sphere.triangles.size(); ++t) {
        const auto& tri = sphere.triangles[t];
        const double d = point_triangle_distance(cloud.points[i], sphere.vertices[tri[0]], sphere.vertices[tri[1]],
                                                 sphere.vertices[tri[2]]);
        if (d < best) best = d, facet = t;
      }
      CHECK(best < 1e-9);
      CHECK((cloud.points[i] - eye).dot(sphere.triangle_normal(facet)) < 0.0);
    }
    std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
    for (int k = 0; k < 500; ++k) REQUIRE(visible(sphere, eye, cloud.points[pick(rng)]));
  }
}

TEST_CASE("view errors") {
  const TriangleMesh cube = make_box(Vec3(1, 1, 1));
  CameraModel away = view_camera({0, 0, 3.0}, Vec3::Zero(), 0.9, 16);
  away.extrinsics = look_at(Vec3(3, 0, 0), Vec3(6, 0, 0), Vec3::UnitZ());
  try {
    raycast_view(cube, away, 1);
    FAIL("expected EmptyView");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyView);
  }
  CameraModel inside = view_camera({0, 0, 3.0}, Vec3::Zero(), 0.9, 16);
  inside.extrinsics = look_at(Vec3(0.7, 0, 0), Vec3::Zero(), Vec3::UnitZ());
  CHECK_THROWS_AS(raycast_view(cube, inside, 1), Error);
  CHECK_THROWS_AS(generate_candidate_library(cube, 30, 30, 0.5, 16, 1), Error);
  CHECK_THROWS_AS(Viewpoint({360, 0, 1}).validate(), Error);
  CHECK_THROWS_AS(Viewpoint({0, 91, 1}).validate(), Error);
}

TEST_CASE("candidate grid counting") {
  CHECK(candidate_grid_size(360, 180) == 2);
  CHECK(candidate_grid_size(30, 30) == 12 * 7);
  CHECK(candidate_grid_size(45, 40) == 8 * 5);
  const TriangleMesh cube = make_box(Vec3(0.1, 0.1, 0.1));
  CHECK(generate_candidate_library(cube, 360, 180, 0.5, 16, 1).views.size() <= 2);
  const auto lib = generate_candidate_library(cube, 30, 30, 0.5, 16, 1);
  CHECK(lib.views.size() == 84);
  CHECK(lib.skipped_views == 0);
  std::set<double> elevations;
  for (const auto& v : lib.views) elevations.insert(v.viewpoint.elevation);
  CHECK(elevations == std::set<double>{-90, -60, -30, 0, 30, 60, 90});
}

TEST_CASE("empty views are skipped and an all-empty grid fails") {
  const std::vector<TriangleMesh> parts = {make_box(Vec3(0.1, 0.1, 0.1), Vec3(0.5, 0, 0)),
                                           make_box(Vec3(0.1, 0.1, 0.1), Vec3(-0.5, 0, 0))};
  const TriangleMesh pair = merge(parts);
  try {
    generate_candidate_library(pair, 360, 180, 2.0, 1, 1);  // two pole rays through the gap
    FAIL("expected NoValidViews");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoValidViews);
  }
  const auto lib = generate_candidate_library(pair, 90, 90, 2.0, 1, 1);
  CHECK(lib.views.size() == 2);  // azimuth 0 and 180 at the equator look through both boxes
  CHECK(lib.skipped_views == candidate_grid_size(90, 90) - 2);
}

TEST_CASE("higher resolution never reduces point count") {
  const TriangleMesh sphere = make_icosphere(0.1, 3);
  for (const Viewpoint vp : {Viewpoint{10, 20, 0.5}, Viewpoint{200, -45, 0.5}}) {
    const auto lo = raycast_view(sphere, view_camera(vp, Vec3::Zero(), 0.1, 125), 1);
    const auto hi = raycast_view(sphere, view_camera(vp, Vec3::Zero(), 0.1, 250), 1);
    CHECK(hi.size() >= lo.size());
    CHECK(hi.size() > 3 * lo.size());
  }
}

TEST_CASE("library generation is deterministic and persists byte-identically") {
  const TriangleMesh mesh = merge(std::vector<TriangleMesh>{make_box(Vec3(0.1, 0.06, 0.04)), make_cylinder(0.02, 0.05, 16, Vec3(0.03, 0, 0.02))});
  const auto a = generate_candidate_library(mesh, 60, 60, 0.5, 32, 3);
  const auto b = generate_candidate_library(mesh, 60, 60, 0.5, 32, 3);
  REQUIRE(a.views.size() == b.views.size());
  for (std::size_t i = 0; i < a.views.size(); ++i) CHECK(a.views[i].cloud.points == b.views[i].cloud.points);

  const auto root = std::filesystem::temp_directory_path() / "semreg_test_library";
  std::filesystem::remove_all(root);
  save_library(root / "one", a);
  save_library(root / "two", b);
  for (const auto& entry : std::filesystem::directory_iterator(root / "one"))
    CHECK(read_file(entry.path()) == read_file(root / "two" / entry.path().filename()));
  const auto loaded = load_library(root / "one");
  REQUIRE(loaded.views.size() == a.views.size());
  CHECK(loaded.views[3].cloud.size() == a.views[3].cloud.size());
  CHECK(quaternion_angle(loaded.views[3].camera_pose.rotation(), a.views[3].camera_pose.rotation()) < 1e-6);
  CHECK(loaded.views[3].viewpoint.azimuth == a.views[3].viewpoint.azimuth);
}

TEST_CASE("pruning thresholds") {
  const TriangleMesh cube = make_box(Vec3(0.1, 0.1, 0.1));
  const auto lib = generate_candidate_library(cube, 30, 30, 0.5, 8, 1).views;
  const double inf = std::numeric_limits<double>::infinity();
  const Pose estimate = viewpoint_pose({100, 20, 0.6}, cube.centroid());

  CHECK(prune_candidates(lib, estimate, inf, inf).size() == lib.size());

  const auto nearest = prune_candidates(lib, estimate, 0.0, 0.0);
  REQUIRE(nearest.size() == 1);
  const Vec3 center = estimate.inverse().translation();
  for (const auto& c : lib) CHECK((c.camera_center() - center).norm() >= (lib[nearest[0]].camera_center() - center).norm());
  CHECK(lib[nearest[0]].viewpoint.azimuth == 90);
  CHECK(lib[nearest[0]].viewpoint.elevation == 30);

  const auto kept = prune_candidates(lib, estimate, 0.5, 45.0);
  std::vector<std::size_t> oracle;
  for (std::size_t i = 0; i < lib.size(); ++i) {
    const Pose world_from_cam = lib[i].camera_pose.inverse();
    const double d = (world_from_cam.translation() - center).norm();
    const double a = testing::geodesic_angle_deg(lib[i].camera_pose.rotation_matrix(), estimate.rotation_matrix());
    if (d <= 0.5 && a <= 45.0) oracle.push_back(i);
  }
  CHECK(kept == oracle);
  CHECK(kept.size() < lib.size() / 2);
  CHECK(!kept.empty());
}
