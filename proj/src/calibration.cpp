#include "semreg/calibration.hpp"

#include "semreg/common.hpp"
#include "semreg/io.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <sstream>

namespace semreg {

void CameraIntrinsics::validate() const {
  if (!(f.x() > 0 && f.y() > 0)) throw Error(ErrorKind::InvalidArgument, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorKind::InvalidArgument, "resolution must be positive");
  if (!(c.x() >= 0 && c.x() <= width && c.y() >= 0 && c.y() <= height))
    throw Error(ErrorKind::InvalidArgument, "principal point lies outside the image");
}

Vec2 project_camera_point(const Vec3& p, const CameraIntrinsics& in) {
  if (p.z() <= 1e-9) throw Error(ErrorKind::NonPositiveDepth, "point is behind or on the camera plane");
  const double x = p.x() / p.z();
  const double y = p.y() / p.z();
  const double r2 = x * x + y * y;
  const double k1 = in.d[0], k2 = in.d[1], p1 = in.d[2], p2 = in.d[3];
  const double radial = 1.0 + k1 * r2 + k2 * r2 * r2;
  const double xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
  const double yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
  return {in.f.x() * xd + in.c.x(), in.f.y() * yd + in.c.y()};
}

Vec2 project(const Vec3& world_point, const CameraModel& model) {
  return project_camera_point(model.extrinsics.transform_point(world_point), model.intrinsics);
}

double reprojection_error(const CameraModel& model, std::span<const CalibrationObservation> observations) {
  if (observations.empty()) throw Error(ErrorKind::EmptyObservations, "no observations");
  double sum = 0.0;
  for (const auto& o : observations) sum += (o.pixel - project(o.world_point, model)).norm();
  return sum / static_cast<double>(observations.size());
}

CalibrationBounds CalibrationBounds::around(const CameraModel& initial, double rotation, double translation,
                                            double focal_fraction, double principal_fraction, double distortion) {
  const auto& in = initial.intrinsics;
  CalibrationVector center;
  center << 0, 0, 0, 0, 0, 0, in.f.x(), in.f.y(), in.c.x(), in.c.y(), in.d;
  CalibrationVector half;
  half << rotation, rotation, rotation, translation, translation, translation, focal_fraction * in.f.x(),
      focal_fraction * in.f.y(), principal_fraction * in.width, principal_fraction * in.height, distortion,
      distortion, distortion, distortion;
  return {center - half, center + half};
}

CameraModel from_parameters(const CameraModel& initial, const CalibrationVector& p) {
  CameraModel m = initial;
  m.extrinsics = exp(Twist{p.segment<3>(0), p.segment<3>(3)}) * initial.extrinsics;
  m.intrinsics.f = p.segment<2>(6);
  m.intrinsics.c = p.segment<2>(8);
  m.intrinsics.d = p.segment<4>(10);
  return m;
}

CalibrationVector to_parameters(const CameraModel& initial, const CameraModel& model) {
  const Twist delta = log(model.extrinsics * initial.extrinsics.inverse());
  CalibrationVector p;
  p << delta.rotational, delta.translational, model.intrinsics.f, model.intrinsics.c, model.intrinsics.d;
  return p;
}

namespace {

void check_geometry(std::span<const CalibrationObservation> obs) {
  if (obs.size() < 6)
    throw Error(ErrorKind::InsufficientObservations,
                "need at least 6 observations, got " + std::to_string(obs.size()));
  Vec3 mean = Vec3::Zero();
  for (const auto& o : obs) mean += o.world_point;
  mean /= static_cast<double>(obs.size());
  Eigen::MatrixXd centered(obs.size(), 3);
  for (std::size_t i = 0; i < obs.size(); ++i) centered.row(i) = (obs[i].world_point - mean).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const auto s = svd.singularValues();
  if (s[0] <= 0.0 || s[1] <= 1e-9 * s[0])
    throw Error(ErrorKind::DegenerateGeometry, "world points are collinear");
}

}  // namespace

CalibrationResult calibrate(std::span<const CalibrationObservation> observations, const CameraModel& initial,
                            const CalibrationBounds& bounds, const BoundedMinimizeOptions& options) {
  check_geometry(observations);
  initial.intrinsics.validate();

  const CalibrationVector x0 = to_parameters(initial, initial);
  for (int i = 0; i < kCalibrationParameters; ++i)
    if (!(bounds.lower[i] <= x0[i] && x0[i] <= bounds.upper[i]))
      throw Error(ErrorKind::InvalidArgument, "initial parameter " + std::to_string(i) + " lies outside its bounds");

  // Work in unit-box coordinates so that every parameter has a comparable scale.
  const CalibrationVector mid = 0.5 * (bounds.lower + bounds.upper);
  CalibrationVector half = 0.5 * (bounds.upper - bounds.lower);
  for (int i = 0; i < kCalibrationParameters; ++i)
    if (half[i] <= 0) half[i] = 1.0;  // pinned parameter
  auto to_model = [&](const Eigen::VectorXd& z) {
    const CalibrationVector p = mid + half.cwiseProduct(CalibrationVector(z));
    return from_parameters(initial, p.cwiseMax(bounds.lower).cwiseMin(bounds.upper));
  };
  auto cost = [&](const Eigen::VectorXd& z) {
    const CameraModel m = to_model(z);
    double sum = 0.0;
    for (const auto& o : observations) {
      const Vec3 pc = m.extrinsics.transform_point(o.world_point);
      if (pc.z() <= 1e-9) return std::numeric_limits<double>::infinity();
      sum += (o.pixel - project_camera_point(pc, m.intrinsics)).squaredNorm();
    }
    return sum;
  };

  Eigen::VectorXd z0 = (x0 - mid).cwiseQuotient(half);
  Eigen::VectorXd lo = (bounds.lower - mid).cwiseQuotient(half);
  Eigen::VectorXd hi = (bounds.upper - mid).cwiseQuotient(half);
  z0 = z0.cwiseMax(lo).cwiseMin(hi);
  const auto opt = minimize_bounded(cost, z0, lo, hi, options);

  CalibrationResult result;
  result.model = to_model(opt.x);
  result.iterations = opt.iterations;
  result.converged = opt.converged;
  result.cost_history = opt.cost_history;
  result.per_observation_residuals.reserve(observations.size());
  double sum = 0.0;
  for (const auto& o : observations) {
    const double r = (o.pixel - project(o.world_point, result.model)).norm();
    result.per_observation_residuals.push_back(r);
    sum += r;
  }
  result.mean_pixel_error = sum / static_cast<double>(observations.size());
  return result;
}

std::vector<CalibrationObservation> read_observations_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<CalibrationObservation> obs;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.find_first_of("XYZuv") != std::string::npos &&
        line.find_first_of("0123456789") == std::string::npos)
      continue;  // header
    std::array<double, 5> v{};
    std::istringstream ss(line);
    std::string cell;
    int k = 0;
    while (std::getline(ss, cell, ',')) {
      if (k >= 5) throw Error(ErrorKind::ParseError, path.string() + ":" + std::to_string(line_no) + ": too many columns");
      try {
        std::size_t used = 0;
        v[k] = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw Error(ErrorKind::ParseError, path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
      ++k;
    }
    if (k != 5) throw Error(ErrorKind::ParseError, path.string() + ":" + std::to_string(line_no) + ": expected 5 columns X,Y,Z,u,v");
    obs.push_back({Vec3(v[0], v[1], v[2]), Vec2(v[3], v[4])});
  }
  return obs;
}

void write_observations_csv(const std::filesystem::path& path, std::span<const CalibrationObservation> observations) {
  std::string out = "X,Y,Z,u,v\n";
  char line[256];
  for (const auto& o : observations) {
    const int n = std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%.17g\n", o.world_point.x(),
                                o.world_point.y(), o.world_point.z(), o.pixel.x(), o.pixel.y());
    out.append(line, n);
  }
  write_file_atomic(path, out);
}

}  // namespace semreg

namespace semreg {

nlohmann::json intrinsics_to_json(const CameraIntrinsics& in) {
  return {{"fx", in.f.x()}, {"fy", in.f.y()}, {"cx", in.c.x()}, {"cy", in.c.y()},
          {"k1", in.d[0]},  {"k2", in.d[1]},  {"p1", in.d[2]},  {"p2", in.d[3]},
          {"width", in.width}, {"height", in.height}};
}

CameraIntrinsics intrinsics_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::ParseError, "intrinsics must be an object");
  CameraIntrinsics in;
  auto number = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw Error(ErrorKind::ParseError, std::string(key) + ": expected a number");
    out = j[key].get<double>();
  };
  auto integer = [&](const char* key, int& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer()) throw Error(ErrorKind::ParseError, std::string(key) + ": expected an integer");
    out = j[key].get<int>();
  };
  number("fx", in.f.x());
  number("fy", in.f.y());
  number("cx", in.c.x());
  number("cy", in.c.y());
  number("k1", in.d[0]);
  number("k2", in.d[1]);
  number("p1", in.d[2]);
  number("p2", in.d[3]);
  integer("width", in.width);
  integer("height", in.height);
  in.validate();
  return in;
}

nlohmann::json camera_to_json(const CameraModel& model) {
  return {{"intrinsics", intrinsics_to_json(model.intrinsics)}, {"extrinsics", pose_to_json(model.extrinsics)}};
}

CameraModel camera_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("intrinsics"))
    throw Error(ErrorKind::ParseError, "camera: missing 'intrinsics'");
  CameraModel model;
  model.intrinsics = intrinsics_from_json(j["intrinsics"]);
  if (j.contains("extrinsics")) model.extrinsics = pose_from_json(j["extrinsics"]);
  return model;
}

}  // namespace semreg
