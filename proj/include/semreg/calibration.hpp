#pragma once

#include "semreg/geometry.hpp"
#include "semreg/io.hpp"
#include "semreg/optimize.hpp"

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <span>
#include <vector>

namespace semreg {

/// Pinhole intrinsics with first-order Brown-Conrady distortion d = [k1, k2, p1, p2].
struct CameraIntrinsics {
  Vec2 f{525.0, 525.0};
  Vec2 c{319.5, 239.5};
  Eigen::Vector4d d = Eigen::Vector4d::Zero();
  int width = 640;
  int height = 480;

  /// Throws InvalidArgument if a focal length is not positive or c leaves the image.
  void validate() const;
  double mean_focal() const { return 0.5 * (f.x() + f.y()); }
};

/// extrinsics maps world points into the camera frame (camera-from-world).
struct CameraModel {
  CameraIntrinsics intrinsics;
  Pose extrinsics;
};

struct CalibrationObservation {
  Vec3 world_point;  // meters
  Vec2 pixel;        // pixels
};

/// Distorts and projects a point already expressed in the camera frame.
Vec2 project_camera_point(const Vec3& p, const CameraIntrinsics& intrinsics);
/// World point -> pixel. Throws NonPositiveDepth when camera-frame Z <= 1e-9.
Vec2 project(const Vec3& world_point, const CameraModel& model);

/// Mean Euclidean pixel residual. Throws EmptyObservations.
double reprojection_error(const CameraModel& model, std::span<const CalibrationObservation> observations);

/// Optimizer parameter layout: twist delta on the initial extrinsics (rotation,
/// translation), then fx, fy, cx, cy, k1, k2, p1, p2.
inline constexpr int kCalibrationParameters = 14;
using CalibrationVector = Eigen::Matrix<double, kCalibrationParameters, 1>;

struct CalibrationBounds {
  CalibrationVector lower;
  CalibrationVector upper;

  /// Box centred on the initial model: +-rotation (rad) and +-translation (m) for
  /// the extrinsic delta, +-focal_fraction of f, +-principal_fraction of the image
  /// size for c, +-distortion for every coefficient.
  static CalibrationBounds around(const CameraModel& initial, double rotation = 0.2, double translation = 0.2,
                                  double focal_fraction = 0.2, double principal_fraction = 0.1,
                                  double distortion = 0.5);
};

CalibrationVector to_parameters(const CameraModel& initial, const CameraModel& model);
CameraModel from_parameters(const CameraModel& initial, const CalibrationVector& params);

struct CalibrationResult {
  CameraModel model;
  double mean_pixel_error = 0.0;
  std::vector<double> per_observation_residuals;
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;  // sum of squared pixel residuals per iteration
};

/// Minimizes the summed squared reprojection error over extrinsics, focal
/// lengths, principal point and distortion within `bounds`.
/// Throws InsufficientObservations (< 6), DegenerateGeometry (collinear world
/// points) and InvalidArgument (initial model outside bounds). Non-convergence
/// is reported through CalibrationResult::converged.
CalibrationResult calibrate(std::span<const CalibrationObservation> observations, const CameraModel& initial,
                            const CalibrationBounds& bounds, const BoundedMinimizeOptions& options = {});

/// {"fx","fy","cx","cy","k1","k2","p1","p2","width","height"}; missing keys keep defaults.
nlohmann::json intrinsics_to_json(const CameraIntrinsics& intrinsics);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);
/// {"intrinsics": {...}, "extrinsics": pose}
nlohmann::json camera_to_json(const CameraModel& model);
CameraModel camera_from_json(const nlohmann::json& j);

/// CSV with header X,Y,Z,u,v.
std::vector<CalibrationObservation> read_observations_csv(const std::filesystem::path& path);
void write_observations_csv(const std::filesystem::path& path, std::span<const CalibrationObservation> observations);

}  // namespace semreg
