#include "semreg/geometry.hpp"

#include "semreg/common.hpp"

#include <algorithm>
#include <cmath>

namespace semreg {

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

}  // namespace

Pose::Pose(const Quat& rotation, const Vec3& translation)
    : rotation_(rotation.normalized()), translation_(translation) {}

Pose::Pose(const Mat3& rotation, const Vec3& translation)
    : rotation_(Quat(rotation).normalized()), translation_(translation) {}

Pose Pose::from_axis_angle(const Vec3& axis, double angle, const Vec3& translation) {
  return Pose(Quat(Eigen::AngleAxisd(angle, axis.normalized())), translation);
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Pose Pose::inverse() const {
  const Quat qi = rotation_.conjugate();
  return Pose(qi, -(qi * translation_));
}

Pose Pose::operator*(const Pose& b) const {
  return Pose(rotation_ * b.rotation_, rotation_ * b.translation_ + translation_);
}

Eigen::Matrix<double, 6, 1> Twist::vector() const {
  Eigen::Matrix<double, 6, 1> v;
  v << rotational, translational;
  return v;
}

Twist Twist::from_vector(const Eigen::Matrix<double, 6, 1>& v) {
  return {v.head<3>(), v.tail<3>()};
}

Pose exp(const Twist& xi) {
  const Vec3& w = xi.rotational;
  const double theta = w.norm();
  const Mat3 W = skew(w);
  Mat3 V;
  Quat q;
  if (theta < 1e-8) {
    V = Mat3::Identity() + 0.5 * W;
    q = Quat(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z());
  } else {
    const double a = (1.0 - std::cos(theta)) / (theta * theta);
    const double b = (theta - std::sin(theta)) / (theta * theta * theta);
    V = Mat3::Identity() + a * W + b * W * W;
    q = Quat(Eigen::AngleAxisd(theta, w / theta));
  }
  return Pose(q, V * xi.translational);
}

Twist log(const Pose& pose) {
  Eigen::AngleAxisd aa(pose.rotation());
  Vec3 w = aa.axis() * aa.angle();
  if (aa.angle() > M_PI) w = aa.axis() * (aa.angle() - 2.0 * M_PI);
  const double theta = w.norm();
  const Mat3 W = skew(w);
  Mat3 Vinv;
  if (theta < 1e-8) {
    Vinv = Mat3::Identity() - 0.5 * W;
  } else {
    const double half = 0.5 * theta;
    const double c = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
    Vinv = Mat3::Identity() - 0.5 * W + c * W * W;
  }
  return {w, Vinv * pose.translation()};
}

Pose compose(const Pose& a, const Pose& b) { return a * b; }
Pose invert(const Pose& p) { return p.inverse(); }

void LabeledPointCloud::reserve(std::size_t n, bool with_normals) {
  points.reserve(n);
  labels.reserve(n);
  if (with_normals) normals.reserve(n);
}

void LabeledPointCloud::push_back(const Vec3& p, Label label) {
  points.push_back(p);
  labels.push_back(label);
}

void LabeledPointCloud::push_back(const Vec3& p, Label label, const Vec3& normal) {
  points.push_back(p);
  labels.push_back(label);
  normals.push_back(normal);
}

void LabeledPointCloud::validate() const {
  if (labels.size() != points.size())
    throw Error(ErrorKind::InvalidArgument, "labels and points differ in length");
  if (!normals.empty()) {
    if (normals.size() != points.size())
      throw Error(ErrorKind::InvalidArgument, "normals and points differ in length");
    for (const auto& n : normals)
      if (std::abs(n.norm() - 1.0) > 1e-6)
        throw Error(ErrorKind::InvalidArgument, "normal is not unit length");
  }
}

Vec3 LabeledPointCloud::centroid() const {
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points) sum += p;
  return points.empty() ? sum : Vec3(sum / static_cast<double>(points.size()));
}

LabeledPointCloud apply(const Pose& p, const LabeledPointCloud& cloud) {
  LabeledPointCloud out;
  out.labels = cloud.labels;
  out.points.resize(cloud.size());
  const Mat3 R = p.rotation_matrix();
  for (std::size_t i = 0; i < cloud.size(); ++i) out.points[i] = R * cloud.points[i] + p.translation();
  if (cloud.has_normals()) {
    out.normals.resize(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) out.normals[i] = (R * cloud.normals[i]).normalized();
  }
  return out;
}

LabeledPointCloud crop_by_label(const LabeledPointCloud& cloud, Label label) {
  LabeledPointCloud out;
  const bool normals = cloud.has_normals();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.labels[i] != label) continue;
    out.points.push_back(cloud.points[i]);
    out.labels.push_back(label);
    if (normals) out.normals.push_back(cloud.normals[i]);
  }
  return out;
}

double quaternion_angle(const Quat& q1, const Quat& q2) {
  const double inner = q1.coeffs().dot(q2.coeffs());
  const double arg = std::clamp(2.0 * inner * inner - 1.0, -1.0, 1.0);
  return std::acos(arg) * 180.0 / M_PI;
}

PoseError pose_error(const Pose& estimate, const Pose& truth) {
  return {(estimate.translation() - truth.translation()).norm(),
          quaternion_angle(estimate.rotation(), truth.rotation())};
}

Vec3 euler_zyx(const Mat3& R) {
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  return {roll, pitch, yaw};
}

}  // namespace semreg
