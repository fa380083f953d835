#pragma once

#include "semreg/calibration.hpp"
#include "semreg/geometry.hpp"
#include "semreg/mesh.hpp"

#include <filesystem>
#include <vector>

namespace semreg {

/// Camera placement on a sphere around an object: azimuth in [0, 360),
/// elevation in [-90, 90] (degrees), distance in meters.
struct Viewpoint {
  double azimuth = 0.0;
  double elevation = 0.0;
  double distance = 1.0;

  void validate() const;
};

/// View-dependent model cloud ray-cast from a mesh. camera_pose is the
/// rendering camera's extrinsics in the object frame (camera-from-object).
struct CandidateCrop {
  LabeledPointCloud cloud;
  Viewpoint viewpoint;
  Pose camera_pose;
  int resolution = 0;

  Vec3 camera_center() const { return camera_pose.inverse().translation(); }
};

/// Camera-from-world extrinsics for a camera at `eye` looking at `target`
/// (x right, y down, z forward). `up` must not be parallel to the view direction.
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

/// Extrinsics for a viewpoint around `center`. World +z is up; at the poles the
/// up vector falls back to world +x.
Pose viewpoint_pose(const Viewpoint& viewpoint, const Vec3& center);

/// Square res x res pinhole camera whose field of view just encloses a sphere of
/// `radius` around `center` as seen from the viewpoint.
CameraModel view_camera(const Viewpoint& viewpoint, const Vec3& center, double radius, int resolution);

/// Casts one ray per pixel centre of the camera's image grid (ideal pinhole, no
/// distortion) and keeps the nearest hit. Points are in the mesh frame, normals
/// are geometric triangle normals turned toward the camera.
/// Throws EmptyView when no ray hits and InvalidArgument when the camera sits
/// inside the mesh bounding sphere.
LabeledPointCloud raycast_view(const Bvh& bvh, const CameraModel& camera, Label label);
LabeledPointCloud raycast_view(const TriangleMesh& mesh, const CameraModel& camera, Label label);

struct CandidateLibrary {
  std::vector<CandidateCrop> views;
  int skipped_views = 0;
};

/// One view per (azimuth, elevation) grid cell. Azimuths are sampled on
/// [0, 360), elevations on [-90, 90] including both poles. Empty views are
/// skipped and counted. Throws NoValidViews when every view is empty and
/// InvalidArgument when distance does not exceed the mesh bounding radius.
CandidateLibrary generate_candidate_library(const TriangleMesh& mesh, double azimuth_step, double elevation_step,
                                            double distance, int resolution, Label label);

/// Number of grid cells generate_candidate_library visits.
int candidate_grid_size(double azimuth_step, double elevation_step);

/// Keeps candidates whose camera centre lies within max_translation of the
/// estimated camera's centre and whose orientation is within max_angle
/// (quaternion metric). `estimated_camera_pose` is camera-from-object. The
/// nearest candidate (by centre distance, then angle, then index) is always kept.
/// Returned indices are ascending.
std::vector<std::size_t> prune_candidates(const std::vector<CandidateCrop>& library, const Pose& estimated_camera_pose,
                                          double max_translation, double max_angle);

/// Directory of view_NNNN.ply files plus index.json. Output is byte-identical for identical libraries.
void save_library(const std::filesystem::path& dir, const CandidateLibrary& library);
CandidateLibrary load_library(const std::filesystem::path& dir);

}  // namespace semreg
