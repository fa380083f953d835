#pragma once

#include "semreg/calibration.hpp"
#include "semreg/fusion.hpp"
#include "semreg/registration.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace semreg {

struct NoiseSpec {
  double depth_sigma = 0.0;      // meters
  double label_flip_rate = 0.0;  // fraction of valid pixels
  double dropout_rate = 0.0;     // fraction of valid pixels

  void validate() const;
};

enum class PipelineMode { Fused, SingleFrame };

PipelineMode parse_pipeline_mode(const std::string& name);
const char* to_string(PipelineMode mode);

struct CalibrationSettings {
  double bound_rotation = 0.2;            // radians
  double bound_translation = 0.2;         // meters
  double bound_focal_fraction = 0.2;
  double bound_principal_fraction = 0.1;
  double bound_distortion = 0.5;
  BoundedMinimizeOptions optimizer;
};

struct RaycastSettings {
  double azimuth_step = 30.0;    // degrees
  double elevation_step = 30.0;  // degrees
  double distance = 1.0;         // meters
  int resolution = 250;          // pixels
  Label label = 1;
};

struct BenchSettings {
  PipelineMode mode = PipelineMode::Fused;
  int keyframe_interval = 5;
  bool use_prior = true;
  double min_confidence = 2.0;
  double library_azimuth_step = 45.0;
  double library_elevation_step = 45.0;
  double library_min_elevation = 0.0;  // degrees; views from below the support plane are dropped
  double library_distance = 1.0;
  int library_resolution = 64;
  int runs = 1;
};

struct PipelineConfig {
  CameraIntrinsics camera;
  CalibrationSettings calibration;
  RaycastSettings raycast;
  FusionParams fusion;
  IcpParams icp{.variant = IcpVariant::PointToPlane};  // fused and back-projected clouds carry normals
  PruneThresholds pruning;
  NoiseSpec noise;
  BenchSettings bench;
  std::uint64_t seed = 0;
  int threads = 0;

  /// Range-checks every field; the message names the offending field path.
  void validate() const;
};

/// One configurable scalar, addressed by a dotted path such as "icp.max_iterations".
struct ConfigField {
  std::string path;
  std::string type;  // "number", "integer", "bool" or "string"
  std::string range;
  std::string description;
  std::function<nlohmann::json(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const nlohmann::json&)> set;  // checks type and range
};

const std::vector<ConfigField>& config_fields();

/// Nested JSON of every field.
nlohmann::json config_to_json(const PipelineConfig& config);
/// Applies a (possibly partial) nested JSON document over `config`. Unknown
/// keys, wrong types and out-of-range values throw ParseError or
/// InvalidArgument naming the field path.
void apply_config_json(PipelineConfig& config, const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);
/// "path=value"; value parsed as JSON when possible, otherwise as a string.
void apply_config_override(PipelineConfig& config, const std::string& assignment);
/// One line per field: path, type, default, range, description.
std::string describe_config_fields();

CalibrationBounds calibration_bounds(const PipelineConfig& config, const CameraModel& initial);

}  // namespace semreg
