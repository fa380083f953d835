#pragma once

#include "semreg/geometry.hpp"
#include "semreg/kdtree.hpp"
#include "semreg/raycast.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace semreg {

enum class IcpVariant { PointToPoint, PointToPlane };

IcpVariant parse_icp_variant(const std::string& name);
const char* to_string(IcpVariant variant);

struct IcpParams {
  int max_iterations = 100;
  double correspondence_max_distance = 0.05;  // meters
  double convergence_translation = 1e-6;      // meters
  double convergence_rotation = 1e-4;         // degrees
  double fitness_epsilon = 0.01;              // meters
  IcpVariant variant = IcpVariant::PointToPoint;

  void validate() const;
};

struct RegistrationResult {
  Pose pose;             // model frame -> scene frame
  double fitness = 0.0;  // fraction of model points with a scene neighbour within fitness_epsilon
  double rmse = 0.0;     // over accepted correspondences at the final pose
  int iterations = 0;
  bool converged = false;
  std::size_t candidate_index = 0;
  std::size_t icp_calls = 0;  // candidates evaluated by register_object
  /// Truncated correspondence cost sum_i min(d_i^2, max_distance^2) at the start of each iteration.
  std::vector<double> cost_history;
};

/// Translation = crop centroid, rotation = identity. Throws EmptyCrop.
Pose centroid_seed(const LabeledPointCloud& scene_crop);

/// Least-squares rigid transform mapping `source` onto `target` (paired by index).
Pose kabsch(std::span<const Vec3> source, std::span<const Vec3> target);

/// Model-to-scene ICP. Each model point pairs with its nearest scene point;
/// pairs farther than correspondence_max_distance are rejected. Throws
/// NoCorrespondences when nothing survives at the seed.
RegistrationResult icp(const LabeledPointCloud& model, const LabeledPointCloud& scene, const Pose& seed,
                       const IcpParams& params);
RegistrationResult icp(const LabeledPointCloud& model, const LabeledPointCloud& scene, const KdTree& scene_index,
                       const Pose& seed, const IcpParams& params);

/// Fraction of model points, transformed by pose, whose nearest scene point lies within epsilon.
double fitness(const LabeledPointCloud& model, const LabeledPointCloud& scene, const Pose& pose, double epsilon);
double fitness(const LabeledPointCloud& model, const KdTree& scene_index, const Pose& pose, double epsilon);

struct PruneThresholds {
  double max_translation = 0.5;  // meters
  double max_angle = 45.0;       // degrees
};

/// Registers every (pruned) candidate against the scene crop and keeps the best
/// by fitness, then lower rmse, then lower candidate index.
///
/// Without a prior each candidate is seeded at the crop centroid, oriented as
/// the candidate's rendering viewpoint implies relative to `viewer`
/// (camera-from-world of the observing camera). With a prior (object-in-world)
/// the library is pruned against the camera pose the prior implies and every
/// survivor is seeded at the prior.
/// Throws EmptyCrop, InvalidArgument (empty library) and AllCandidatesFailed.
RegistrationResult register_object(const std::vector<CandidateCrop>& library, const LabeledPointCloud& scene_crop,
                                   const std::optional<Pose>& prior, const IcpParams& params,
                                   const PruneThresholds& thresholds, const Pose& viewer = Pose::identity());

}  // namespace semreg
