#pragma once

#include "semreg/calibration.hpp"

#include <random>
#include <vector>

namespace semreg::testing {

/// Kinect-like camera with every parameter nonzero.
inline CameraModel reference_camera() {
  CameraModel m;
  m.intrinsics.f = Vec2(525.3, 520.8);
  m.intrinsics.c = Vec2(318.2, 242.7);
  m.intrinsics.d = Eigen::Vector4d(0.08, -0.15, 0.002, -0.0015);
  m.extrinsics = exp(Twist{Vec3(0.1, -0.2, 0.05), Vec3(0.1, -0.05, 0.3)});
  return m;
}

/// Target corners spread through the view frustum at 0.6-2.0 m, projected with
/// `truth` plus isotropic Gaussian pixel noise.
inline std::vector<CalibrationObservation> synthetic_observations(const CameraModel& truth, std::size_t n,
                                                                  double pixel_sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto& in = truth.intrinsics;
  const Pose world_from_camera = truth.extrinsics.inverse();
  std::vector<CalibrationObservation> obs;
  while (obs.size() < n) {
    const double z = 0.6 + 1.4 * u(rng);
    const double px = 20 + (in.width - 40) * u(rng);
    const double py = 20 + (in.height - 40) * u(rng);
    const Vec3 cam((px - in.c.x()) / in.f.x() * z, (py - in.c.y()) / in.f.y() * z, z);
    const Vec3 world = world_from_camera.transform_point(cam);
    Vec2 pixel = project(world, truth);
    pixel += pixel_sigma * Vec2(noise(rng), noise(rng));
    obs.push_back({world, pixel});
  }
  return obs;
}

/// Every parameter scaled by an independent factor in [1 - fraction, 1 + fraction].
inline CameraModel perturbed(const CameraModel& truth, double fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-fraction, fraction);
  CameraModel m = truth;
  Twist t = log(truth.extrinsics);
  for (int k = 0; k < 3; ++k) {
    t.rotational[k] *= 1 + u(rng);
    t.translational[k] *= 1 + u(rng);
  }
  m.extrinsics = exp(t);
  for (int k = 0; k < 2; ++k) {
    m.intrinsics.f[k] *= 1 + u(rng);
    m.intrinsics.c[k] *= 1 + u(rng);
  }
  for (int k = 0; k < 4; ++k) m.intrinsics.d[k] *= 1 + u(rng);
  return m;
}

/// Absolute parameter vector: extrinsic log twist, f, c, d.
inline CalibrationVector absolute_parameters(const CameraModel& m) {
  const Twist t = log(m.extrinsics);
  CalibrationVector p;
  p << t.rotational, t.translational, m.intrinsics.f, m.intrinsics.c, m.intrinsics.d;
  return p;
}

inline double max_relative_error(const CameraModel& estimate, const CameraModel& truth) {
  const auto a = absolute_parameters(estimate), b = absolute_parameters(truth);
  return ((a - b).cwiseAbs().cwiseQuotient(b.cwiseAbs())).maxCoeff();
}

}  // namespace semreg::testing
