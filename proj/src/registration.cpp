#include "semreg/registration.hpp"

#include "semreg/common.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace semreg {

IcpVariant parse_icp_variant(const std::string& name) {
  if (name == "point_to_point") return IcpVariant::PointToPoint;
  if (name == "point_to_plane") return IcpVariant::PointToPlane;
  throw Error(ErrorKind::InvalidArgument, "unknown icp_variant '" + name + "' (point_to_point|point_to_plane)");
}

const char* to_string(IcpVariant variant) {
  return variant == IcpVariant::PointToPoint ? "point_to_point" : "point_to_plane";
}

void IcpParams::validate() const {
  if (max_iterations <= 0) throw Error(ErrorKind::InvalidArgument, "max_iterations must be positive");
  if (!(correspondence_max_distance > 0)) throw Error(ErrorKind::InvalidArgument, "correspondence_max_distance must be positive");
  if (!(convergence_translation > 0)) throw Error(ErrorKind::InvalidArgument, "convergence_translation must be positive");
  if (!(convergence_rotation > 0)) throw Error(ErrorKind::InvalidArgument, "convergence_rotation must be positive");
  if (!(fitness_epsilon > 0)) throw Error(ErrorKind::InvalidArgument, "fitness_epsilon must be positive");
}

Pose centroid_seed(const LabeledPointCloud& scene_crop) {
  if (scene_crop.empty()) throw Error(ErrorKind::EmptyCrop, "scene crop is empty");
  return Pose::from_translation(scene_crop.centroid());
}

Pose kabsch(std::span<const Vec3> source, std::span<const Vec3> target) {
  if (source.size() != target.size() || source.empty())
    throw Error(ErrorKind::InvalidArgument, "kabsch needs equally sized, non-empty point sets");
  Vec3 cs = Vec3::Zero(), ct = Vec3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    cs += source[i];
    ct += target[i];
  }
  cs /= static_cast<double>(source.size());
  ct /= static_cast<double>(source.size());
  Mat3 H = Mat3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) H += (source[i] - cs) * (target[i] - ct).transpose();
  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) D(2, 2) = -1.0;
  const Mat3 R = svd.matrixV() * D * svd.matrixU().transpose();
  return Pose(R, ct - R * cs);
}

namespace {

/// Linearized point-to-plane step (small-angle), solved in closed form.
Pose point_to_plane_step(std::span<const Vec3> source, std::span<const Vec3> target, std::span<const Vec3> normals) {
  Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    Eigen::Matrix<double, 6, 1> J;
    J << source[i].cross(normals[i]), normals[i];
    const double r = normals[i].dot(source[i] - target[i]);
    A += J * J.transpose();
    b -= J * r;
  }
  const Eigen::Matrix<double, 6, 1> x = A.ldlt().solve(b);
  if (!x.allFinite()) return Pose::identity();
  return exp(Twist{x.head<3>(), x.tail<3>()});
}

}  // namespace

RegistrationResult icp(const LabeledPointCloud& model, const LabeledPointCloud& scene, const Pose& seed,
                       const IcpParams& params) {
  if (scene.empty()) throw Error(ErrorKind::InvalidArgument, "scene cloud is empty");
  return icp(model, scene, KdTree(scene.points), seed, params);
}

RegistrationResult icp(const LabeledPointCloud& model, const LabeledPointCloud& scene, const KdTree& scene_index,
                       const Pose& seed, const IcpParams& params) {
  params.validate();
  if (model.empty()) throw Error(ErrorKind::InvalidArgument, "model cloud is empty");
  if (scene.empty() || scene_index.empty()) throw Error(ErrorKind::InvalidArgument, "scene cloud is empty");
  const bool plane = params.variant == IcpVariant::PointToPlane;
  if (plane && !scene.has_normals())
    throw Error(ErrorKind::InvalidArgument, "point_to_plane ICP needs scene normals");

  const double max_d2 = params.correspondence_max_distance * params.correspondence_max_distance;
  const std::size_t n = model.size();
  std::vector<Vec3> moved(n);
  std::vector<KdTree::Neighbor> nn(n);
  std::vector<Vec3> src, dst, nrm;
  src.reserve(n);
  dst.reserve(n);

  RegistrationResult result;
  Pose pose = seed;
  auto associate = [&](const Pose& p) {
    const Mat3 R = p.rotation_matrix();
    parallel_for(n, 1024, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        moved[i] = R * model.points[i] + p.translation();
        nn[i] = scene_index.nearest(moved[i]);
      }
    });
    src.clear();
    dst.clear();
    nrm.clear();
    double truncated = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (nn[i].squared_distance <= max_d2) {
        src.push_back(moved[i]);
        dst.push_back(scene.points[nn[i].index]);
        if (plane) nrm.push_back(scene.normals[nn[i].index]);
        truncated += nn[i].squared_distance;
      } else {
        truncated += max_d2;
      }
    }
    return truncated;
  };

  for (int iter = 1; iter <= params.max_iterations; ++iter) {
    result.cost_history.push_back(associate(pose));
    result.iterations = iter;
    if (src.empty()) {
      if (iter == 1) throw Error(ErrorKind::NoCorrespondences, "no correspondences within range of the seed");
      break;
    }
    if (src.size() < 3) break;
    const Pose delta = plane ? point_to_plane_step(src, dst, nrm) : kabsch(src, dst);
    pose = delta * pose;
    if (delta.translation().norm() < params.convergence_translation &&
        quaternion_angle(delta.rotation(), Quat::Identity()) < params.convergence_rotation) {
      result.converged = true;
      break;
    }
  }

  associate(pose);
  double sse = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) sse += (src[i] - dst[i]).squaredNorm();
  result.rmse = src.empty() ? 0.0 : std::sqrt(sse / static_cast<double>(src.size()));
  result.pose = pose;
  const double eps2 = params.fitness_epsilon * params.fitness_epsilon;
  std::size_t inliers = 0;
  for (std::size_t i = 0; i < n; ++i) inliers += nn[i].squared_distance <= eps2;
  result.fitness = static_cast<double>(inliers) / static_cast<double>(n);
  return result;
}

double fitness(const LabeledPointCloud& model, const KdTree& scene_index, const Pose& pose, double epsilon) {
  if (model.empty() || scene_index.empty()) throw Error(ErrorKind::InvalidArgument, "fitness needs non-empty clouds");
  const double eps2 = epsilon * epsilon;
  const Mat3 R = pose.rotation_matrix();
  std::size_t inliers = 0;
  for (const auto& p : model.points) inliers += scene_index.nearest(R * p + pose.translation()).squared_distance <= eps2;
  return static_cast<double>(inliers) / static_cast<double>(model.size());
}

double fitness(const LabeledPointCloud& model, const LabeledPointCloud& scene, const Pose& pose, double epsilon) {
  return fitness(model, KdTree(scene.points), pose, epsilon);
}

RegistrationResult register_object(const std::vector<CandidateCrop>& library, const LabeledPointCloud& scene_crop,
                                   const std::optional<Pose>& prior, const IcpParams& params,
                                   const PruneThresholds& thresholds, const Pose& viewer) {
  params.validate();
  if (library.empty()) throw Error(ErrorKind::InvalidArgument, "candidate library is empty");
  const Pose centroid = centroid_seed(scene_crop);
  const KdTree index(scene_crop.points);

  std::vector<std::size_t> candidates;
  if (prior) {
    candidates = prune_candidates(library, viewer * *prior, thresholds.max_translation, thresholds.max_angle);
  } else {
    candidates.resize(library.size());
    for (std::size_t i = 0; i < library.size(); ++i) candidates[i] = i;
  }

  const Pose world_from_viewer = viewer.inverse();
  std::vector<std::optional<RegistrationResult>> results(candidates.size());
  parallel_for(candidates.size(), 1, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const CandidateCrop& c = library[candidates[k]];
      Pose seed;
      if (prior) {
        seed = *prior;
      } else {
        const Quat rotation = (world_from_viewer * c.camera_pose).rotation();
        seed = Pose(rotation, centroid.translation() - (rotation * c.cloud.centroid()));
      }
      try {
        results[k] = icp(c.cloud, scene_crop, index, seed, params);
        results[k]->candidate_index = candidates[k];
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::NoCorrespondences) throw;
      }
    }
  });

  std::optional<RegistrationResult> best;
  for (auto& r : results) {
    if (!r) continue;
    const bool wins = !best || r->fitness > best->fitness ||
                      (r->fitness == best->fitness &&
                       (r->rmse < best->rmse || (r->rmse == best->rmse && r->candidate_index < best->candidate_index)));
    if (wins) best = std::move(r);
  }
  if (!best) throw Error(ErrorKind::AllCandidatesFailed, "every candidate failed to find correspondences");
  best->icp_calls = candidates.size();
  return *best;
}

}  // namespace semreg
