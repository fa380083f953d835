#pragma once

#include "semreg/calibration.hpp"
#include "semreg/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace semreg {

/// Depth (meters along the optical axis, 0 = invalid) and per-pixel labels of
/// one ideal pinhole frame, row-major.
struct LabeledFrame {
  std::vector<float> depth;
  std::vector<Label> labels;
  CameraIntrinsics intrinsics;
  int timestamp = 0;

  int width() const { return intrinsics.width; }
  int height() const { return intrinsics.height; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(intrinsics.width) * intrinsics.height; }
  /// Blank frame: all depths 0, all labels background.
  static LabeledFrame blank(const CameraIntrinsics& intrinsics, int timestamp = 0);
  void validate(double max_range = 5.0) const;
};

struct Surfel {
  Vec3 position;
  Vec3 normal;
  double radius = 0.0;
  Label label = kBackgroundLabel;
  double confidence = 0.0;
  int last_seen = 0;
};

struct SurfelMap {
  std::vector<Surfel> surfels;
  int frame_count = 0;

  std::size_t size() const { return surfels.size(); }
  bool empty() const { return surfels.empty(); }
};

enum class LabelCostMode { Squared, Indicator };

LabelCostMode parse_label_cost_mode(const std::string& name);
const char* to_string(LabelCostMode mode);

struct FusionParams {
  double label_weight = 0.1;  // weight of the label term against the point-to-plane term (mm^2)
  LabelCostMode label_cost_mode = LabelCostMode::Squared;
  double max_range = 5.0;          // meters
  double tracking_lost_rms = 0.03;  // meters
  int min_valid_pixels = 100;
  int active_window = 20;  // frames
  double splat_depth_tolerance = 0.01;  // meters, see render_map
  double merge_radius = 0.005;  // meters, in the surfel's tangent plane
  double merge_depth_band = 0.01;  // meters, along the surfel normal
  double merge_angle = 20.0;    // degrees
  // normal estimation
  int smoothing_radius = 3;    // pixels
  double smoothing_depth_sigma = 0.01;  // meters
  int normal_step = 2;         // pixels
  double depth_jump = 0.02;    // meters
  // geometric tracking
  int gauss_newton_iterations = 10;  // per pyramid level
  double association_distance = 0.1;        // meters, coarsest level
  double association_distance_fine = 0.01;  // meters, finest level and reported costs
  double association_angle = 30.0;    // degrees
  double convergence_translation = 1e-7;  // meters
  double convergence_rotation = 1e-5;     // degrees
  // discrete label search
  int label_search_scales = 3;
  double label_search_translation = 0.002;  // meters, coarsest probe
  double label_search_rotation = 0.2;       // degrees, coarsest probe
  int label_search_rounds = 4;              // accepted moves per scale

  void validate() const;
};

struct TrackingResult {
  Pose pose;  // camera-from-world
  double final_cost = 0.0;
  double label_cost = 0.0;
  /// Point-to-plane SSE in mm^2 over usable frame points, each capped at the
  /// squared fine association gate; unassociated points count the cap.
  double geometric_cost = 0.0;
  double residual_rms = 0.0;    // meters
  std::size_t correspondences = 0;
  int iterations = 0;
  bool converged = false;
};

/// Back-projected frame in the camera frame. Where the normal estimate is
/// invalid (image border, missing neighbours, depth jump) normal_valid is 0 and
/// the stored normal faces the camera.
struct FramePoints {
  LabeledPointCloud cloud;
  std::vector<std::uint32_t> pixel;  // row-major pixel index of each point
  std::vector<std::uint8_t> normal_valid;
};

/// Undistorted inverse pinhole projection of every pixel with depth > 0, with
/// normals from central differences of the bilateral-smoothed depth map.
FramePoints backproject_frame(const LabeledFrame& frame, const FusionParams& params = {});
LabeledPointCloud backproject(const LabeledFrame& frame, const FusionParams& params = {});

/// Per-pixel nearest surfel after splatting. index is kNoSurfel where nothing lands.
struct MapRender {
  static constexpr std::uint32_t kNoSurfel = std::numeric_limits<std::uint32_t>::max();
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> index;
  std::vector<float> depth;
};

/// Splats surfels with last_seen >= min_last_seen as camera-facing disks. A
/// surfel covers the pixels whose centres fall strictly inside its projected
/// radius, and always the pixel nearest its centre. With depth_tolerance 0 the
/// nearest surfel wins, ties to the lower index. Otherwise each pixel takes,
/// among surfels within depth_tolerance behind the nearest, the highest
/// confidence, then the smallest distance to the pixel centre.
MapRender render_map(const SurfelMap& map, const CameraIntrinsics& intrinsics, const Pose& camera_from_world,
                     int min_last_seen = std::numeric_limits<int>::min(), double depth_tolerance = 0.0);

/// Sum over pixels valid in both the frame and the label render of the label
/// disagreement: squared difference or 0/1 mismatch.
double label_cost(const LabeledFrame& frame, const MapRender& render, const SurfelMap& map, LabelCostMode mode);
double label_cost(const LabeledFrame& frame, const SurfelMap& map, const Pose& candidate_pose,
                  LabelCostMode mode = LabelCostMode::Squared, int min_last_seen = std::numeric_limits<int>::min(),
                  double depth_tolerance = 0.0);

/// Frame-to-model tracking: coarse-to-fine Gauss-Newton point-to-plane against
/// the active model rendered at previous_pose, then a discrete twist search on
/// geometric + label_weight * label cost. Throws InvalidArgument for an empty
/// map or a frame with too few valid pixels, TrackingLost when the residual RMS
/// exceeds tracking_lost_rms.
TrackingResult track_camera(const SurfelMap& map, const LabeledFrame& frame, const Pose& previous_pose,
                            const FusionParams& params = {});

/// Merges each back-projected point with a valid normal into the nearest
/// pre-existing surfel within merge_radius sharing its label and normal (within
/// merge_angle), or appends a new surfel. Points never merge with surfels
/// created from the same frame.
void integrate_frame(SurfelMap& map, const LabeledFrame& frame, const Pose& camera_from_world,
                     const FusionParams& params = {});

LabeledPointCloud extract_cloud(const SurfelMap& map, double min_confidence);

/// NNNN.depth.png (uint16 millimeters), NNNN.labels.png (uint16), camera.json,
/// optional poses.json (camera-from-world per frame).
void save_frames(const std::filesystem::path& dir, const std::vector<LabeledFrame>& frames,
                 const std::vector<Pose>* poses = nullptr);
struct FrameSequence {
  std::vector<LabeledFrame> frames;
  std::optional<std::vector<Pose>> poses;
};
FrameSequence load_frames(const std::filesystem::path& dir);

}  // namespace semreg
