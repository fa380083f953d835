#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <vector>

namespace semreg {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Semantic class id. 0 is background everywhere in the pipeline.
using Label = std::uint16_t;
inline constexpr Label kBackgroundLabel = 0;

/// Rigid transform: unit quaternion (scalar-first, Hamilton) plus translation in
/// meters. Maps a point p to R p + t.
class Pose {
 public:
  Pose() : rotation_(Quat::Identity()), translation_(Vec3::Zero()) {}
  Pose(const Quat& rotation, const Vec3& translation);
  Pose(const Mat3& rotation, const Vec3& translation);

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t) { return Pose(Quat::Identity(), t); }
  /// Rotation of `angle` radians about `axis` (normalized internally).
  static Pose from_axis_angle(const Vec3& axis, double angle,
                              const Vec3& translation = Vec3::Zero());

  const Quat& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }
  Eigen::Matrix4d matrix() const;

  Vec3 transform_point(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 rotate(const Vec3& v) const { return rotation_ * v; }

  Pose inverse() const;
  /// `a * b` applies b first, then a.
  Pose operator*(const Pose& b) const;

 private:
  Quat rotation_;
  Vec3 translation_;
};

/// Element of se(3): rotation vector (radians) and translational part (meters).
struct Twist {
  Vec3 rotational = Vec3::Zero();
  Vec3 translational = Vec3::Zero();

  Twist operator-() const { return {-rotational, -translational}; }
  Eigen::Matrix<double, 6, 1> vector() const;
  static Twist from_vector(const Eigen::Matrix<double, 6, 1>& v);
};

/// SE(3) exponential map.
Pose exp(const Twist& xi);
/// Inverse of exp for rotation angles below pi.
Twist log(const Pose& pose);

Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& p);

/// Points with per-point semantic labels and optional unit normals.
struct LabeledPointCloud {
  std::vector<Vec3> points;
  std::vector<Label> labels;
  std::vector<Vec3> normals;  // empty when absent

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }
  void reserve(std::size_t n, bool with_normals);
  void push_back(const Vec3& p, Label label);
  void push_back(const Vec3& p, Label label, const Vec3& normal);
  /// Throws InvalidArgument when lengths disagree or a normal is not unit length.
  void validate() const;
  Vec3 centroid() const;
};

LabeledPointCloud apply(const Pose& p, const LabeledPointCloud& cloud);

/// Single pass over the cloud; keeps input order.
LabeledPointCloud crop_by_label(const LabeledPointCloud& cloud, Label label);

/// theta = acos(2<q1,q2>^2 - 1) in degrees, argument clamped to [-1, 1].
double quaternion_angle(const Quat& q1, const Quat& q2);

struct PoseError {
  double translation_norm = 0.0;  // meters
  double angle = 0.0;             // degrees
};

PoseError pose_error(const Pose& estimate, const Pose& truth);

inline constexpr double kSuccessTranslation = 0.05;  // meters
inline constexpr double kSuccessAngle = 15.0;        // degrees

/// Strict on both gates: 50 mm or 15 degrees exactly is a failure.
inline bool is_success(const PoseError& e) {
  return e.translation_norm < kSuccessTranslation && e.angle < kSuccessAngle;
}

/// Intrinsic Z-Y-X angles (yaw, pitch, roll) in radians; returned as (roll, pitch, yaw).
Vec3 euler_zyx(const Mat3& rotation);

}  // namespace semreg
