#include "semreg/config.hpp"

#include "semreg/common.hpp"
#include "semreg/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace semreg {

void NoiseSpec::validate() const {
  if (!(depth_sigma >= 0)) throw Error(ErrorKind::InvalidArgument, "depth_sigma must be non-negative");
  if (!(label_flip_rate >= 0 && label_flip_rate <= 1)) throw Error(ErrorKind::InvalidArgument, "label_flip_rate must be in [0, 1]");
  if (!(dropout_rate >= 0 && dropout_rate <= 1)) throw Error(ErrorKind::InvalidArgument, "dropout_rate must be in [0, 1]");
}

PipelineMode parse_pipeline_mode(const std::string& name) {
  if (name == "fused") return PipelineMode::Fused;
  if (name == "single-frame") return PipelineMode::SingleFrame;
  throw Error(ErrorKind::InvalidArgument, "unknown mode '" + name + "' (fused|single-frame)");
}

const char* to_string(PipelineMode mode) { return mode == PipelineMode::Fused ? "fused" : "single-frame"; }

namespace {

using json = nlohmann::json;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_bound(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << v;
  return os.str();
}

[[noreturn]] void type_error(const std::string& path, const char* expected) {
  throw Error(ErrorKind::ParseError, path + ": expected " + expected);
}

[[noreturn]] void range_error(const std::string& path, const std::string& range) {
  throw Error(ErrorKind::InvalidArgument, path + ": value outside " + range);
}

class Registry {
 public:
  template <class Ref>
  void number(const std::string& path, double lo, bool lo_open, double hi, const std::string& desc, Ref ref) {
    const std::string range = std::string(lo_open ? "(" : "[") + format_bound(lo) + ", " + format_bound(hi) +
                              (std::isinf(hi) ? ")" : "]");
    fields.push_back({path, "number", range, desc,
                      [ref](const PipelineConfig& c) { return json(ref(const_cast<PipelineConfig&>(c))); },
                      [=](PipelineConfig& c, const json& v) {
                        if (!v.is_number()) type_error(path, "a number");
                        const double x = v.get<double>();
                        if (!std::isfinite(x) || (lo_open ? !(x > lo) : !(x >= lo)) || x > hi) range_error(path, range);
                        ref(c) = x;
                      }});
  }

  template <class T, class Ref>
  void integer(const std::string& path, long long lo, long long hi, const std::string& desc, Ref ref) {
    const std::string range = "[" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
    fields.push_back({path, "integer", range, desc,
                      [ref](const PipelineConfig& c) { return json(ref(const_cast<PipelineConfig&>(c))); },
                      [=](PipelineConfig& c, const json& v) {
                        if (!v.is_number_integer()) type_error(path, "an integer");
                        if (v.is_number_unsigned()) {
                          const unsigned long long x = v.get<unsigned long long>();
                          if (x > static_cast<unsigned long long>(hi) || (lo > 0 && x < static_cast<unsigned long long>(lo)))
                            range_error(path, range);
                        } else {
                          const long long x = v.get<long long>();
                          if (x < lo || x > hi) range_error(path, range);
                        }
                        ref(c) = v.get<T>();
                      }});
  }

  template <class Ref>
  void boolean(const std::string& path, const std::string& desc, Ref ref) {
    fields.push_back({path, "bool", "true|false", desc,
                      [ref](const PipelineConfig& c) { return json(ref(const_cast<PipelineConfig&>(c))); },
                      [=](PipelineConfig& c, const json& v) {
                        if (!v.is_boolean()) type_error(path, "true or false");
                        ref(c) = v.get<bool>();
                      }});
  }

  template <class Parse, class Print, class Ref>
  void choice(const std::string& path, const std::string& options, const std::string& desc, Parse parse, Print print,
              Ref ref) {
    fields.push_back({path, "string", options, desc,
                      [=](const PipelineConfig& c) { return json(print(ref(const_cast<PipelineConfig&>(c)))); },
                      [=](PipelineConfig& c, const json& v) {
                        if (!v.is_string()) type_error(path, "a string");
                        try {
                          ref(c) = parse(v.get<std::string>());
                        } catch (const Error&) {
                          range_error(path, options);
                        }
                      }});
  }

  std::vector<ConfigField> fields;
};

std::vector<ConfigField> build_fields() {
  Registry r;
  const int kIntMax = std::numeric_limits<int>::max();
  // camera
  r.number("camera.fx", 0, true, kInf, "focal length x, pixels", [](PipelineConfig& c) -> double& { return c.camera.f.x(); });
  r.number("camera.fy", 0, true, kInf, "focal length y, pixels", [](PipelineConfig& c) -> double& { return c.camera.f.y(); });
  r.number("camera.cx", -kInf, false, kInf, "principal point x, pixels", [](PipelineConfig& c) -> double& { return c.camera.c.x(); });
  r.number("camera.cy", -kInf, false, kInf, "principal point y, pixels", [](PipelineConfig& c) -> double& { return c.camera.c.y(); });
  r.number("camera.k1", -1, false, 1, "radial distortion k1", [](PipelineConfig& c) -> double& { return c.camera.d[0]; });
  r.number("camera.k2", -1, false, 1, "radial distortion k2", [](PipelineConfig& c) -> double& { return c.camera.d[1]; });
  r.number("camera.p1", -1, false, 1, "tangential distortion p1", [](PipelineConfig& c) -> double& { return c.camera.d[2]; });
  r.number("camera.p2", -1, false, 1, "tangential distortion p2", [](PipelineConfig& c) -> double& { return c.camera.d[3]; });
  r.integer<int>("camera.width", 1, 16384, "image width, pixels", [](PipelineConfig& c) -> int& { return c.camera.width; });
  r.integer<int>("camera.height", 1, 16384, "image height, pixels", [](PipelineConfig& c) -> int& { return c.camera.height; });
  // calibration
  r.number("calibration.bound_rotation", 0, true, M_PI, "extrinsic rotation bound, radians",
           [](PipelineConfig& c) -> double& { return c.calibration.bound_rotation; });
  r.number("calibration.bound_translation", 0, true, kInf, "extrinsic translation bound, meters",
           [](PipelineConfig& c) -> double& { return c.calibration.bound_translation; });
  r.number("calibration.bound_focal_fraction", 0, true, 0.99, "focal length bound, fraction of initial",
           [](PipelineConfig& c) -> double& { return c.calibration.bound_focal_fraction; });
  r.number("calibration.bound_principal_fraction", 0, true, 1, "principal point bound, fraction of image size",
           [](PipelineConfig& c) -> double& { return c.calibration.bound_principal_fraction; });
  r.number("calibration.bound_distortion", 0, true, 1, "distortion coefficient bound",
           [](PipelineConfig& c) -> double& { return c.calibration.bound_distortion; });
  r.integer<int>("calibration.max_iterations", 1, 100000, "optimizer iteration cap",
                 [](PipelineConfig& c) -> int& { return c.calibration.optimizer.max_iterations; });
  r.number("calibration.relative_cost_tolerance", 0, true, 1, "stop on relative decrease below this twice in a row",
           [](PipelineConfig& c) -> double& { return c.calibration.optimizer.relative_cost_tolerance; });
  r.number("calibration.gradient_tolerance", 0, true, kInf, "stop on projected gradient inf-norm below this",
           [](PipelineConfig& c) -> double& { return c.calibration.optimizer.gradient_tolerance; });
  // raycast
  r.number("raycast.azimuth_step", 0, true, 360, "azimuth grid step, degrees",
           [](PipelineConfig& c) -> double& { return c.raycast.azimuth_step; });
  r.number("raycast.elevation_step", 0, true, 180, "elevation grid step, degrees",
           [](PipelineConfig& c) -> double& { return c.raycast.elevation_step; });
  r.number("raycast.distance", 0, true, kInf, "camera distance from the mesh centroid, meters",
           [](PipelineConfig& c) -> double& { return c.raycast.distance; });
  r.integer<int>("raycast.resolution", 1, 4096, "rendered image side, pixels",
                 [](PipelineConfig& c) -> int& { return c.raycast.resolution; });
  r.integer<Label>("raycast.label", 0, 65535, "label assigned to rendered points",
                   [](PipelineConfig& c) -> Label& { return c.raycast.label; });
  // fusion
  r.number("fusion.label_weight", 0, false, kInf, "weight of the label term (geometric term in mm^2)",
           [](PipelineConfig& c) -> double& { return c.fusion.label_weight; });
  r.choice("fusion.label_cost_mode", "squared|indicator", "label disagreement per pixel", parse_label_cost_mode,
           [](LabelCostMode m) { return std::string(to_string(m)); },
           [](PipelineConfig& c) -> LabelCostMode& { return c.fusion.label_cost_mode; });
  r.number("fusion.max_range", 0, true, 65.535, "maximum valid depth, meters",
           [](PipelineConfig& c) -> double& { return c.fusion.max_range; });
  r.number("fusion.tracking_lost_rms", 0, true, kInf, "residual RMS that declares tracking lost, meters",
           [](PipelineConfig& c) -> double& { return c.fusion.tracking_lost_rms; });
  r.integer<int>("fusion.min_valid_pixels", 1, kIntMax, "fewest valid pixels a tracked frame may have",
                 [](PipelineConfig& c) -> int& { return c.fusion.min_valid_pixels; });
  r.integer<int>("fusion.active_window", 1, kIntMax, "frames a surfel stays in the active model",
                 [](PipelineConfig& c) -> int& { return c.fusion.active_window; });
  r.number("fusion.merge_radius", 0, true, kInf, "surfel merge radius, meters",
           [](PipelineConfig& c) -> double& { return c.fusion.merge_radius; });
  r.number("fusion.merge_depth_band", 0, true, kInf, "surfel merge distance along the surfel normal, meters",
           [](PipelineConfig& c) -> double& { return c.fusion.merge_depth_band; });
  r.number("fusion.merge_angle", 0, true, 180, "surfel merge normal angle, degrees",
           [](PipelineConfig& c) -> double& { return c.fusion.merge_angle; });
  r.integer<int>("fusion.smoothing_radius", 0, 32, "bilateral depth smoothing radius for normals, pixels",
                 [](PipelineConfig& c) -> int& { return c.fusion.smoothing_radius; });
  r.number("fusion.smoothing_depth_sigma", 0, true, kInf, "bilateral range sigma, meters",
           [](PipelineConfig& c) -> double& { return c.fusion.smoothing_depth_sigma; });
  r.integer<int>("fusion.normal_step", 1, 32, "central difference half-width for normals, pixels",
                 [](PipelineConfig& c) -> int& { return c.fusion.normal_step; });
  r.number("fusion.depth_jump", 0, true, kInf, "depth discontinuity that invalidates a normal, meters",
           [](PipelineConfig& c) -> double& { return c.fusion.depth_jump; });
  r.integer<int>("fusion.gauss_newton_iterations", 1, 1000, "tracking iterations per pyramid level",
                 [](PipelineConfig& c) -> int& { return c.fusion.gauss_newton_iterations; });
  r.number("fusion.splat_depth_tolerance", 0, false, kInf, "depth band behind the front surfel searched when rendering the map, meters",
           [](PipelineConfig& c) -> double& { return c.fusion.splat_depth_tolerance; });
  r.number("fusion.association_distance", 0, true, kInf, "tracking correspondence distance gate at the coarsest level, meters",
           [](PipelineConfig& c) -> double& { return c.fusion.association_distance; });
  r.number("fusion.association_distance_fine", 0, true, kInf, "tracking correspondence distance gate at full resolution, meters",
           [](PipelineConfig& c) -> double& { return c.fusion.association_distance_fine; });
  r.number("fusion.association_angle", 0, true, 180, "tracking correspondence normal gate, degrees",
           [](PipelineConfig& c) -> double& { return c.fusion.association_angle; });
  r.number("fusion.convergence_translation", 0, true, kInf, "tracking step size that counts as converged, meters",
           [](PipelineConfig& c) -> double& { return c.fusion.convergence_translation; });
  r.number("fusion.convergence_rotation", 0, true, kInf, "tracking step angle that counts as converged, degrees",
           [](PipelineConfig& c) -> double& { return c.fusion.convergence_rotation; });
  r.integer<int>("fusion.label_search_scales", 0, 16, "label search refinement scales",
                 [](PipelineConfig& c) -> int& { return c.fusion.label_search_scales; });
  r.number("fusion.label_search_translation", 0, true, kInf, "coarsest label probe translation, meters",
           [](PipelineConfig& c) -> double& { return c.fusion.label_search_translation; });
  r.number("fusion.label_search_rotation", 0, true, 180, "coarsest label probe rotation, degrees",
           [](PipelineConfig& c) -> double& { return c.fusion.label_search_rotation; });
  r.integer<int>("fusion.label_search_rounds", 0, 1000, "accepted label probe moves per scale",
                 [](PipelineConfig& c) -> int& { return c.fusion.label_search_rounds; });
  // icp
  r.integer<int>("icp.max_iterations", 1, 100000, "ICP iteration cap",
                 [](PipelineConfig& c) -> int& { return c.icp.max_iterations; });
  r.number("icp.correspondence_max_distance", 0, true, kInf, "correspondence rejection distance, meters",
           [](PipelineConfig& c) -> double& { return c.icp.correspondence_max_distance; });
  r.number("icp.convergence_translation", 0, true, kInf, "update size that counts as converged, meters",
           [](PipelineConfig& c) -> double& { return c.icp.convergence_translation; });
  r.number("icp.convergence_rotation", 0, true, kInf, "update angle that counts as converged, degrees",
           [](PipelineConfig& c) -> double& { return c.icp.convergence_rotation; });
  r.number("icp.fitness_epsilon", 0, true, kInf, "inlier distance for the fitness score, meters",
           [](PipelineConfig& c) -> double& { return c.icp.fitness_epsilon; });
  r.choice("icp.variant", "point_to_point|point_to_plane", "ICP error metric", parse_icp_variant,
           [](IcpVariant v) { return std::string(to_string(v)); },
           [](PipelineConfig& c) -> IcpVariant& { return c.icp.variant; });
  // pruning
  r.number("pruning.max_translation", 0, false, kInf, "candidate camera-centre distance gate, meters",
           [](PipelineConfig& c) -> double& { return c.pruning.max_translation; });
  r.number("pruning.max_angle", 0, false, 180, "candidate orientation gate, degrees",
           [](PipelineConfig& c) -> double& { return c.pruning.max_angle; });
  // noise
  r.number("noise.depth_sigma", 0, false, kInf, "Gaussian depth noise, meters",
           [](PipelineConfig& c) -> double& { return c.noise.depth_sigma; });
  r.number("noise.label_flip_rate", 0, false, 1, "fraction of valid pixels given another label",
           [](PipelineConfig& c) -> double& { return c.noise.label_flip_rate; });
  r.number("noise.dropout_rate", 0, false, 1, "fraction of valid pixels zeroed",
           [](PipelineConfig& c) -> double& { return c.noise.dropout_rate; });
  // bench
  r.choice("bench.mode", "fused|single-frame", "register against the fused map or each keyframe alone",
           parse_pipeline_mode, [](PipelineMode m) { return std::string(to_string(m)); },
           [](PipelineConfig& c) -> PipelineMode& { return c.bench.mode; });
  r.integer<int>("bench.keyframe_interval", 1, kIntMax, "register every this many frames",
                 [](PipelineConfig& c) -> int& { return c.bench.keyframe_interval; });
  r.boolean("bench.use_prior", "prune candidates around the previous estimate (fused mode)",
            [](PipelineConfig& c) -> bool& { return c.bench.use_prior; });
  r.number("bench.min_confidence", 0, false, kInf, "surfel confidence needed to enter the registered cloud",
           [](PipelineConfig& c) -> double& { return c.bench.min_confidence; });
  r.number("bench.library_azimuth_step", 0, true, 360, "candidate library azimuth step, degrees",
           [](PipelineConfig& c) -> double& { return c.bench.library_azimuth_step; });
  r.number("bench.library_elevation_step", 0, true, 180, "candidate library elevation step, degrees",
           [](PipelineConfig& c) -> double& { return c.bench.library_elevation_step; });
  r.number("bench.library_min_elevation", -90, false, 90, "lowest candidate view elevation kept, degrees",
           [](PipelineConfig& c) -> double& { return c.bench.library_min_elevation; });
  r.number("bench.library_distance", 0, true, kInf, "candidate library camera distance, meters",
           [](PipelineConfig& c) -> double& { return c.bench.library_distance; });
  r.integer<int>("bench.library_resolution", 1, 4096, "candidate library resolution, pixels",
                 [](PipelineConfig& c) -> int& { return c.bench.library_resolution; });
  r.integer<int>("bench.runs", 1, 100000, "independent seeded noise runs",
                 [](PipelineConfig& c) -> int& { return c.bench.runs; });
  // run
  r.integer<std::uint64_t>("seed", 0, std::numeric_limits<long long>::max(), "top-level random seed",
                           [](PipelineConfig& c) -> std::uint64_t& { return c.seed; });
  r.integer<int>("threads", 0, 1024, "worker threads, 0 = hardware concurrency",
                 [](PipelineConfig& c) -> int& { return c.threads; });
  return std::move(r.fields);
}

const ConfigField* find_field(const std::string& path) {
  for (const auto& f : config_fields())
    if (f.path == path) return &f;
  return nullptr;
}

void apply_object(PipelineConfig& config, const json& j, const std::string& prefix) {
  if (!j.is_object()) {
    if (prefix.empty()) throw Error(ErrorKind::ParseError, "config must be a JSON object");
    throw Error(ErrorKind::ParseError, prefix + ": expected an object");
  }
  for (const auto& [key, value] : j.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (const ConfigField* f = find_field(path)) {
      f->set(config, value);
    } else if (value.is_object()) {
      bool known_prefix = false;
      for (const auto& field : config_fields())
        if (field.path.rfind(path + ".", 0) == 0) known_prefix = true;
      if (!known_prefix) throw Error(ErrorKind::ParseError, "unknown config field '" + path + "'");
      apply_object(config, value, path);
    } else {
      throw Error(ErrorKind::ParseError, "unknown config field '" + path + "'");
    }
  }
}

}  // namespace

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = build_fields();
  return fields;
}

void PipelineConfig::validate() const {
  PipelineConfig scratch;
  for (const auto& f : config_fields()) f.set(scratch, f.get(*this));
  auto wrap = [](const char* block, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidArgument, std::string(block) + ": " + e.what());
    }
  };
  wrap("camera", [&] { camera.validate(); });
  wrap("fusion", [&] { fusion.validate(); });
  wrap("icp", [&] { icp.validate(); });
  wrap("noise", [&] { noise.validate(); });
}

json config_to_json(const PipelineConfig& config) {
  json out = json::object();
  for (const auto& f : config_fields()) {
    std::string pointer = "/" + f.path;
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    out[json::json_pointer(pointer)] = f.get(config);
  }
  return out;
}

void apply_config_json(PipelineConfig& config, const json& j) { apply_object(config, j, ""); }

PipelineConfig load_config(const std::filesystem::path& path) {
  PipelineConfig config;
  apply_config_json(config, read_json(path));
  config.validate();
  return config;
}

void apply_config_override(PipelineConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error(ErrorKind::InvalidArgument, "override must look like path=value: '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  const ConfigField* f = find_field(path);
  if (!f) throw Error(ErrorKind::InvalidArgument, "unknown config field '" + path + "'");
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  f->set(config, value);
}

std::string describe_config_fields() {
  const PipelineConfig defaults;
  std::ostringstream os;
  std::size_t width = 0;
  for (const auto& f : config_fields()) width = std::max(width, f.path.size());
  for (const auto& f : config_fields()) {
    os << "  " << f.path << std::string(width - f.path.size() + 2, ' ') << f.type << "  default "
       << f.get(defaults).dump() << "  range " << f.range << "  " << f.description << "\n";
  }
  return os.str();
}

CalibrationBounds calibration_bounds(const PipelineConfig& config, const CameraModel& initial) {
  const auto& s = config.calibration;
  return CalibrationBounds::around(initial, s.bound_rotation, s.bound_translation, s.bound_focal_fraction,
                                   s.bound_principal_fraction, s.bound_distortion);
}

}  // namespace semreg
