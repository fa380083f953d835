#pragma once

#include "semreg/config.hpp"
#include "semreg/fusion.hpp"
#include "semreg/mesh.hpp"
#include "semreg/raycast.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace semreg {

struct SceneObject {
  TriangleMesh mesh;  // object frame
  Label label = 1;
  Pose pose;  // world-from-object
  std::string name;
};

struct SyntheticScene {
  std::vector<SceneObject> objects;
  std::optional<TriangleMesh> background;  // world frame, label 0
  std::vector<Pose> trajectory;            // camera-from-world per frame
  CameraIntrinsics intrinsics;

  /// Throws InvalidArgument for duplicate or zero object labels, an empty
  /// trajectory or invalid meshes.
  void validate() const;
  const SceneObject* find(Label label) const;
  /// Background label plus every object label, ascending.
  std::vector<Label> labels() const;
};

struct OrbitSpec {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;          // meters
  double elevation = 40.0;      // degrees above the z = 0 plane
  double start_azimuth = 0.0;   // degrees
  double sweep = 90.0;          // degrees covered by the whole trajectory
  int frames = 40;
};

/// Cameras on a horizontal arc looking at `center` with world +z up.
std::vector<Pose> orbit_trajectory(const OrbitSpec& orbit);

/// Table with three asymmetric box/cylinder compounds (labels 1..3) under a
/// 640x480 camera on a 40-frame, 90 degree orbit.
SyntheticScene demo_scene();

/// Scene JSON: {"objects":[{"mesh","label","pose","name"}], "background":{"mesh"}|{"plane":{"width","depth"}},
/// "trajectory":{"poses":[...]}|{"orbit":{...}}, "intrinsics":{...}}. Mesh paths are relative to the file.
SyntheticScene load_scene(const std::filesystem::path& path);
/// Writes meshes as OBJ next to scene.json.
void save_scene(const std::filesystem::path& dir, const SyntheticScene& scene);

/// Nearest hit across all scene meshes per pixel, shared across frames.
class SceneRenderer {
 public:
  explicit SceneRenderer(const SyntheticScene& scene);
  /// Ideal pinhole render: depth is camera-frame z, label 0 on background.
  LabeledFrame render(const Pose& camera_from_world, const CameraIntrinsics& intrinsics, int timestamp = 0) const;

 private:
  std::vector<Label> triangle_labels_;
  Bvh bvh_;
};

/// Per valid pixel, in row-major order: Gaussian depth noise, dropout, then a
/// label flip to a uniformly chosen different label from `labels`.
void apply_noise(LabeledFrame& frame, const NoiseSpec& noise, std::uint64_t seed, const std::vector<Label>& labels,
                 double max_range = 5.0);

LabeledFrame render_frame(const SyntheticScene& scene, const Pose& camera_pose, const CameraIntrinsics& intrinsics,
                          const NoiseSpec& noise, std::uint64_t rng_seed);

enum class RecordStatus { Ok, TrackingLost, EmptyCrop, AllCandidatesFailed };
const char* to_string(RecordStatus status);

struct EvalRecord {
  int frame = 0;
  Label object_label = 0;
  RecordStatus status = RecordStatus::Ok;
  bool has_pose = false;
  PoseError error;
  /// Translation error in mm (x, y, z) and Z-Y-X error angles in degrees (roll, pitch, yaw).
  Eigen::Matrix<double, 6, 1> components = Eigen::Matrix<double, 6, 1>::Zero();
  bool success = false;
};

struct EvalSummary {
  std::size_t records = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  double translation_mean_mm = 0.0;  // over successes
  double translation_std_mm = 0.0;
  double angle_mean_deg = 0.0;
  double angle_std_deg = 0.0;
  /// x, y, z (mm), roll, pitch, yaw (deg): max - min and population std of the
  /// error components per object over records with a pose, averaged over objects.
  Eigen::Matrix<double, 6, 1> axis_range = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> axis_std = Eigen::Matrix<double, 6, 1>::Zero();
  std::size_t lost_frames = 0;
  std::size_t surfels = 0;
};

EvalRecord make_record(int frame, Label label, const Pose& estimate, const Pose& truth);
EvalRecord failure_record(int frame, Label label, RecordStatus status);

/// One record per estimate. Throws UnknownLabel when an estimate's label has no truth.
std::vector<EvalRecord> evaluate(const std::vector<std::pair<Label, Pose>>& estimates,
                                 const std::vector<std::pair<Label, Pose>>& truth, int frame = 0);

EvalSummary summarize(const std::vector<EvalRecord>& records);
nlohmann::json summary_to_json(const EvalSummary& summary);

/// records.csv, summary.json, histogram.csv (1 mm and 0.25 degree bins).
void report(const std::vector<EvalRecord>& records, const EvalSummary& summary, const std::filesystem::path& dir);
std::string records_csv(const std::vector<EvalRecord>& records);
std::string histogram_csv(const std::vector<EvalRecord>& records);

/// Clean renders and candidate libraries, reusable across noise seeds.
struct BenchAssets {
  std::vector<LabeledFrame> clean_frames;
  std::vector<CandidateLibrary> libraries;  // parallel to scene.objects
};

BenchAssets prepare_assets(const SyntheticScene& scene, const PipelineConfig& config);

struct PipelineResult {
  std::vector<EvalRecord> records;
  EvalSummary summary;
  std::vector<std::optional<Pose>> trajectory;  // estimated camera-from-world, empty when lost
  SurfelMap map;
};

/// Renders (or reuses) the trajectory, applies noise seeded from `seed`, and
/// in fused mode tracks and integrates every frame, registering each object
/// against the fused cloud every keyframe_interval frames. Single-frame mode
/// registers against the back-projected keyframe alone. Errors are evaluated
/// in the keyframe's camera frame; failures become records, never exceptions.
PipelineResult run_pipeline(const SyntheticScene& scene, const BenchAssets& assets, const PipelineConfig& config,
                            std::uint64_t seed);
PipelineResult run_pipeline(const SyntheticScene& scene, const PipelineConfig& config, std::uint64_t seed);

}  // namespace semreg
