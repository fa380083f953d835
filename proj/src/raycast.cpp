#include "semreg/raycast.hpp"

#include "semreg/common.hpp"
#include "semreg/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

namespace semreg {

namespace {
constexpr double kDeg = M_PI / 180.0;
}

void Viewpoint::validate() const {
  if (!(azimuth >= 0.0 && azimuth < 360.0)) throw Error(ErrorKind::InvalidArgument, "azimuth must lie in [0, 360)");
  if (!(elevation >= -90.0 && elevation <= 90.0))
    throw Error(ErrorKind::InvalidArgument, "elevation must lie in [-90, 90]");
  if (!(distance > 0.0)) throw Error(ErrorKind::InvalidArgument, "distance must be positive");
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  const Vec3 x = z.cross(up).normalized();
  const Vec3 y = z.cross(x);
  Mat3 world_from_camera;
  world_from_camera.col(0) = x;
  world_from_camera.col(1) = y;
  world_from_camera.col(2) = z;
  return Pose(world_from_camera, eye).inverse();
}

Pose viewpoint_pose(const Viewpoint& vp, const Vec3& center) {
  const double az = vp.azimuth * kDeg, el = vp.elevation * kDeg;
  const Vec3 dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  const Vec3 eye = center + vp.distance * dir;
  const bool pole = std::abs(std::abs(vp.elevation) - 90.0) < 1e-9;
  return look_at(eye, center, pole ? Vec3::UnitX() : Vec3::UnitZ());
}

CameraModel view_camera(const Viewpoint& vp, const Vec3& center, double radius, int resolution) {
  if (resolution < 1) throw Error(ErrorKind::InvalidArgument, "resolution must be positive");
  if (!(vp.distance > radius))
    throw Error(ErrorKind::InvalidArgument, "view distance must exceed the mesh bounding radius");
  CameraModel cam;
  cam.extrinsics = viewpoint_pose(vp, center);
  const double half_fov = std::min(1.05 * std::asin(radius / vp.distance), 0.49 * M_PI);
  const double f = 0.5 * resolution / std::tan(half_fov);
  cam.intrinsics.f = Vec2(f, f);
  cam.intrinsics.c = Vec2(0.5 * (resolution - 1), 0.5 * (resolution - 1));
  cam.intrinsics.width = resolution;
  cam.intrinsics.height = resolution;
  return cam;
}

LabeledPointCloud raycast_view(const Bvh& bvh, const CameraModel& camera, Label label) {
  const TriangleMesh& mesh = bvh.mesh();
  if (mesh.empty()) throw Error(ErrorKind::InvalidArgument, "mesh is empty");
  const Pose object_from_camera = camera.extrinsics.inverse();
  const Vec3 eye = object_from_camera.translation();
  const Vec3 centroid = mesh.centroid();
  if ((eye - centroid).norm() <= mesh.bounding_radius(centroid))
    throw Error(ErrorKind::InvalidArgument, "camera lies inside the mesh bounding sphere");

  const auto& in = camera.intrinsics;
  const int w = in.width, h = in.height;
  const Mat3 R = object_from_camera.rotation_matrix();
  std::vector<RayHit> hits(static_cast<std::size_t>(w) * h);
  std::vector<Vec3> dirs(hits.size());
  parallel_for(static_cast<std::size_t>(h), 8, [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = y * w + x;
        const Vec3 d = R * Vec3((x - in.c.x()) / in.f.x(), (static_cast<double>(y) - in.c.y()) / in.f.y(), 1.0);
        dirs[i] = d.normalized();
        hits[i] = bvh.intersect({eye, dirs[i]});
      }
  });

  LabeledPointCloud cloud;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (!hits[i].valid()) continue;
    Vec3 n = mesh.triangle_normal(hits[i].triangle);
    if (n.dot(dirs[i]) > 0.0) n = -n;
    cloud.push_back(eye + hits[i].t * dirs[i], label, n);
  }
  if (cloud.empty()) throw Error(ErrorKind::EmptyView, "no ray hit the mesh");
  return cloud;
}

LabeledPointCloud raycast_view(const TriangleMesh& mesh, const CameraModel& camera, Label label) {
  return raycast_view(Bvh(mesh), camera, label);
}

namespace {

std::vector<double> azimuth_samples(double step) {
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double a = k * step;
    if (a >= 360.0 - 1e-9) break;
    out.push_back(a);
  }
  return out;
}

std::vector<double> elevation_samples(double step) {
  std::vector<double> out;
  for (int k = 0;; ++k) {
    double e = -90.0 + k * step;
    if (e > 90.0 + 1e-9) break;
    out.push_back(std::min(e, 90.0));
  }
  return out;
}

void check_steps(double azimuth_step, double elevation_step) {
  if (!(azimuth_step > 0.0 && azimuth_step <= 360.0))
    throw Error(ErrorKind::InvalidArgument, "azimuth step must lie in (0, 360]");
  if (!(elevation_step > 0.0 && elevation_step <= 180.0))
    throw Error(ErrorKind::InvalidArgument, "elevation step must lie in (0, 180]");
}

}  // namespace

int candidate_grid_size(double azimuth_step, double elevation_step) {
  check_steps(azimuth_step, elevation_step);
  return static_cast<int>(azimuth_samples(azimuth_step).size() * elevation_samples(elevation_step).size());
}

CandidateLibrary generate_candidate_library(const TriangleMesh& mesh, double azimuth_step, double elevation_step,
                                            double distance, int resolution, Label label) {
  check_steps(azimuth_step, elevation_step);
  mesh.validate();
  if (mesh.empty()) throw Error(ErrorKind::InvalidArgument, "mesh is empty");
  const Vec3 center = mesh.centroid();
  const double radius = mesh.bounding_radius(center);
  if (!(distance > radius))
    throw Error(ErrorKind::InvalidArgument, "distance " + std::to_string(distance) +
                                                " m does not exceed the mesh bounding radius " +
                                                std::to_string(radius) + " m");
  const Bvh bvh(mesh);
  CandidateLibrary library;
  for (double el : elevation_samples(elevation_step)) {
    for (double az : azimuth_samples(azimuth_step)) {
      const Viewpoint vp{az, el, distance};
      const CameraModel cam = view_camera(vp, center, radius, resolution);
      try {
        library.views.push_back({raycast_view(bvh, cam, label), vp, cam.extrinsics, resolution});
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyView) throw;
        ++library.skipped_views;
      }
    }
  }
  if (library.views.empty()) throw Error(ErrorKind::NoValidViews, "every view of the mesh was empty");
  return library;
}

std::vector<std::size_t> prune_candidates(const std::vector<CandidateCrop>& library, const Pose& estimated_camera_pose,
                                          double max_translation, double max_angle) {
  if (library.empty()) throw Error(ErrorKind::InvalidArgument, "candidate library is empty");
  const Vec3 center = estimated_camera_pose.inverse().translation();
  std::vector<std::size_t> kept;
  std::optional<std::size_t> nearest;
  double best_d = 0.0, best_a = 0.0;
  for (std::size_t i = 0; i < library.size(); ++i) {
    const double d = (library[i].camera_center() - center).norm();
    const double a = quaternion_angle(library[i].camera_pose.rotation(), estimated_camera_pose.rotation());
    if (d <= max_translation && a <= max_angle) kept.push_back(i);
    if (!nearest || d < best_d || (d == best_d && a < best_a)) {
      nearest = i;
      best_d = d;
      best_a = a;
    }
  }
  if (kept.empty()) kept.push_back(*nearest);
  return kept;
}

void save_library(const std::filesystem::path& dir, const CandidateLibrary& library) {
  std::filesystem::create_directories(dir);
  nlohmann::json views = nlohmann::json::array();
  for (std::size_t i = 0; i < library.views.size(); ++i) {
    const auto& v = library.views[i];
    char name[32];
    std::snprintf(name, sizeof(name), "view_%04zu.ply", i);
    write_ply(dir / name, v.cloud);
    views.push_back({{"file", name},
                     {"azimuth", v.viewpoint.azimuth},
                     {"elevation", v.viewpoint.elevation},
                     {"distance", v.viewpoint.distance},
                     {"resolution", v.resolution},
                     {"points", v.cloud.size()},
                     {"camera_pose", pose_to_json(v.camera_pose)}});
  }
  write_json(dir / "index.json", {{"views", views}, {"skipped_views", library.skipped_views}});
}

CandidateLibrary load_library(const std::filesystem::path& dir) {
  const auto index = read_json(dir / "index.json");
  if (!index.contains("views") || !index["views"].is_array())
    throw Error(ErrorKind::ParseError, (dir / "index.json").string() + ": missing 'views' array");
  CandidateLibrary library;
  library.skipped_views = index.value("skipped_views", 0);
  for (const auto& v : index["views"]) {
    CandidateCrop c;
    c.cloud = read_ply(dir / v.at("file").get<std::string>());
    c.viewpoint = {v.at("azimuth").get<double>(), v.at("elevation").get<double>(), v.at("distance").get<double>()};
    c.resolution = v.at("resolution").get<int>();
    c.camera_pose = pose_from_json(v.at("camera_pose"));
    library.views.push_back(std::move(c));
  }
  if (library.views.empty()) throw Error(ErrorKind::NoValidViews, dir.string() + ": library has no views");
  return library;
}

}  // namespace semreg
