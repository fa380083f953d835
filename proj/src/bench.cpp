#include "semreg/bench.hpp"

#include "semreg/common.hpp"
#include "semreg/io.hpp"
#include "semreg/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace semreg {

void SyntheticScene::validate() const {
  intrinsics.validate();
  if (trajectory.empty()) throw Error(ErrorKind::InvalidArgument, "scene trajectory is empty");
  std::set<Label> seen;
  for (const auto& o : objects) {
    if (o.label == kBackgroundLabel) throw Error(ErrorKind::InvalidArgument, "object labels must be nonzero");
    if (!seen.insert(o.label).second)
      throw Error(ErrorKind::InvalidArgument, "duplicate object label " + std::to_string(o.label));
    o.mesh.validate();
  }
  if (background) background->validate();
}

const SceneObject* SyntheticScene::find(Label label) const {
  for (const auto& o : objects)
    if (o.label == label) return &o;
  return nullptr;
}

std::vector<Label> SyntheticScene::labels() const {
  std::vector<Label> out{kBackgroundLabel};
  for (const auto& o : objects) out.push_back(o.label);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Pose> orbit_trajectory(const OrbitSpec& orbit) {
  if (orbit.frames < 1 || !(orbit.radius > 0))
    throw Error(ErrorKind::InvalidArgument, "orbit needs frames >= 1 and a positive radius");
  if (std::abs(orbit.elevation) >= 90.0) throw Error(ErrorKind::InvalidArgument, "orbit elevation must be inside (-90, 90)");
  std::vector<Pose> poses;
  const double el = orbit.elevation * M_PI / 180.0;
  for (int k = 0; k < orbit.frames; ++k) {
    const double frac = orbit.frames == 1 ? 0.0 : double(k) / double(orbit.frames - 1);
    const double az = (orbit.start_azimuth + frac * orbit.sweep) * M_PI / 180.0;
    const Vec3 eye = orbit.center + orbit.radius * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    poses.push_back(look_at(eye, orbit.center, Vec3::UnitZ()));
  }
  return poses;
}

SyntheticScene demo_scene() {
  SyntheticScene scene;
  auto compound = [](std::initializer_list<TriangleMesh> parts) {
    return merge(std::vector<TriangleMesh>(parts));
  };
  scene.objects.push_back({compound({make_box(Vec3(0.12, 0.08, 0.06), Vec3(0.0, 0.0, 0.03)),
                                     make_cylinder(0.025, 0.08, 24, Vec3(0.03, 0.015, 0.06)),
                                     make_box(Vec3(0.05, 0.03, 0.03), Vec3(-0.07, -0.02, 0.015))}),
                           1, Pose::from_axis_angle(Vec3::UnitZ(), 20.0 * M_PI / 180.0, Vec3(-0.18, 0.08, 0.0)),
                           "engine"});
  scene.objects.push_back({compound({make_cylinder(0.04, 0.10, 24, Vec3(0.0, 0.0, 0.0)),
                                     make_box(Vec3(0.10, 0.03, 0.03), Vec3(0.07, 0.0, 0.015)),
                                     make_box(Vec3(0.03, 0.03, 0.05), Vec3(-0.03, 0.045, 0.025))}),
                           2, Pose::from_axis_angle(Vec3::UnitZ(), -35.0 * M_PI / 180.0, Vec3(0.14, 0.12, 0.0)),
                           "funnel"});
  scene.objects.push_back({compound({make_box(Vec3(0.06, 0.06, 0.14), Vec3(0.0, 0.0, 0.07)),
                                     make_cylinder(0.015, 0.05, 20, Vec3(0.01, 0.01, 0.14)),
                                     make_box(Vec3(0.04, 0.025, 0.04), Vec3(0.045, 0.0, 0.02))}),
                           3, Pose::from_axis_angle(Vec3::UnitZ(), 70.0 * M_PI / 180.0, Vec3(0.06, -0.14, 0.0)),
                           "bottle"});
  scene.background = make_rectangle(1.4, 1.0);
  OrbitSpec orbit;
  orbit.center = Vec3(0.0, 0.0, 0.05);
  orbit.radius = 0.95;
  orbit.elevation = 40.0;
  orbit.start_azimuth = -45.0;
  orbit.sweep = 90.0;
  orbit.frames = 40;
  scene.trajectory = orbit_trajectory(orbit);
  return scene;
}

namespace {

Vec3 vec3_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::ParseError, path + ": expected [x, y, z]");
  for (const auto& v : j)
    if (!v.is_number()) throw Error(ErrorKind::ParseError, path + ": expected numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

double number_or(const nlohmann::json& j, const char* key, double fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw Error(ErrorKind::ParseError, path + "." + key + ": expected a number");
  return j[key].get<double>();
}

}  // namespace

SyntheticScene load_scene(const std::filesystem::path& path) {
  const auto j = read_json(path);
  const auto base = path.parent_path();
  if (!j.is_object()) throw Error(ErrorKind::ParseError, "scene must be a JSON object");
  SyntheticScene scene;
  if (j.contains("intrinsics")) scene.intrinsics = intrinsics_from_json(j["intrinsics"]);
  if (!j.contains("objects") || !j["objects"].is_array()) throw Error(ErrorKind::ParseError, "objects: expected an array");
  for (std::size_t i = 0; i < j["objects"].size(); ++i) {
    const auto& o = j["objects"][i];
    const std::string at = "objects[" + std::to_string(i) + "]";
    if (!o.contains("mesh") || !o["mesh"].is_string()) throw Error(ErrorKind::ParseError, at + ".mesh: expected a path");
    if (!o.contains("label") || !o["label"].is_number_unsigned() || o["label"].get<unsigned>() > 65535)
      throw Error(ErrorKind::ParseError, at + ".label: expected an integer in [1, 65535]");
    SceneObject obj;
    obj.mesh = read_mesh(base / o["mesh"].get<std::string>());
    obj.label = static_cast<Label>(o["label"].get<unsigned>());
    if (o.contains("pose")) obj.pose = pose_from_json(o["pose"]);
    if (o.contains("name") && o["name"].is_string()) obj.name = o["name"].get<std::string>();
    scene.objects.push_back(std::move(obj));
  }
  if (j.contains("background")) {
    const auto& b = j["background"];
    if (b.contains("mesh") && b["mesh"].is_string()) {
      scene.background = read_mesh(base / b["mesh"].get<std::string>());
    } else if (b.contains("plane")) {
      const auto& p = b["plane"];
      scene.background = make_rectangle(number_or(p, "width", 0.8, "background.plane"),
                                        number_or(p, "depth", 0.6, "background.plane"));
    } else {
      throw Error(ErrorKind::ParseError, "background: expected 'mesh' or 'plane'");
    }
  }
  if (!j.contains("trajectory") || !j["trajectory"].is_object())
    throw Error(ErrorKind::ParseError, "trajectory: expected an object");
  const auto& t = j["trajectory"];
  if (t.contains("poses")) {
    if (!t["poses"].is_array()) throw Error(ErrorKind::ParseError, "trajectory.poses: expected an array");
    for (const auto& p : t["poses"]) scene.trajectory.push_back(pose_from_json(p));
  } else if (t.contains("orbit")) {
    const auto& o = t["orbit"];
    OrbitSpec orbit;
    if (o.contains("center")) orbit.center = vec3_from_json(o["center"], "trajectory.orbit.center");
    orbit.radius = number_or(o, "radius", orbit.radius, "trajectory.orbit");
    orbit.elevation = number_or(o, "elevation", orbit.elevation, "trajectory.orbit");
    orbit.start_azimuth = number_or(o, "start_azimuth", orbit.start_azimuth, "trajectory.orbit");
    orbit.sweep = number_or(o, "sweep", orbit.sweep, "trajectory.orbit");
    if (o.contains("frames")) {
      if (!o["frames"].is_number_integer()) throw Error(ErrorKind::ParseError, "trajectory.orbit.frames: expected an integer");
      orbit.frames = o["frames"].get<int>();
    }
    scene.trajectory = orbit_trajectory(orbit);
  } else {
    throw Error(ErrorKind::ParseError, "trajectory: expected 'poses' or 'orbit'");
  }
  scene.validate();
  return scene;
}

void save_scene(const std::filesystem::path& dir, const SyntheticScene& scene) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["intrinsics"] = intrinsics_to_json(scene.intrinsics);
  j["objects"] = nlohmann::json::array();
  for (const auto& o : scene.objects) {
    const std::string file = "object_" + std::to_string(o.label) + ".obj";
    write_obj(dir / file, o.mesh);
    j["objects"].push_back({{"mesh", file}, {"label", o.label}, {"pose", pose_to_json(o.pose)}, {"name", o.name}});
  }
  if (scene.background) {
    write_obj(dir / "background.obj", *scene.background);
    j["background"] = {{"mesh", "background.obj"}};
  }
  nlohmann::json poses = nlohmann::json::array();
  for (const auto& p : scene.trajectory) poses.push_back(pose_to_json(p));
  j["trajectory"] = {{"poses", poses}};
  write_json(dir / "scene.json", j);
}

namespace {

Bvh scene_bvh(const SyntheticScene& scene, std::vector<Label>& triangle_labels) {
  std::vector<TriangleMesh> parts;
  for (const auto& o : scene.objects) {
    parts.push_back(transform(o.mesh, o.pose));
    triangle_labels.insert(triangle_labels.end(), o.mesh.triangles.size(), o.label);
  }
  if (scene.background) {
    parts.push_back(*scene.background);
    triangle_labels.insert(triangle_labels.end(), scene.background->triangles.size(), kBackgroundLabel);
  }
  return Bvh(merge(parts));
}

}  // namespace

SceneRenderer::SceneRenderer(const SyntheticScene& scene) : bvh_(scene_bvh(scene, triangle_labels_)) {}

LabeledFrame SceneRenderer::render(const Pose& camera_from_world, const CameraIntrinsics& K, int timestamp) const {
  LabeledFrame frame = LabeledFrame::blank(K, timestamp);
  if (bvh_.mesh().triangles.empty()) return frame;
  const Pose world_from_camera = camera_from_world.inverse();
  const Mat3 R = world_from_camera.rotation_matrix();
  const Vec3 eye = world_from_camera.translation();
  parallel_for(static_cast<std::size_t>(K.height), 4, [&](std::size_t b, std::size_t e) {
    for (int v = int(b); v < int(e); ++v)
      for (int u = 0; u < K.width; ++u) {
        const Vec3 d((u - K.c.x()) / K.f.x(), (v - K.c.y()) / K.f.y(), 1.0);
        const RayHit hit = bvh_.intersect({eye, R * d});
        if (!hit.valid()) continue;
        const std::size_t i = std::size_t(v) * K.width + u;
        frame.depth[i] = static_cast<float>(hit.t);
        frame.labels[i] = triangle_labels_[hit.triangle];
      }
  });
  return frame;
}

void apply_noise(LabeledFrame& frame, const NoiseSpec& noise, std::uint64_t seed, const std::vector<Label>& labels,
                 double max_range) {
  noise.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (std::size_t i = 0; i < frame.pixel_count(); ++i) {
    if (frame.depth[i] <= 0) continue;
    const double z = frame.depth[i] + noise.depth_sigma * gauss(rng);
    const bool drop = uniform(rng) < noise.dropout_rate;
    const bool flip = uniform(rng) < noise.label_flip_rate;
    const double pick = uniform(rng);
    frame.depth[i] = (drop || !(z > 0) || z > max_range) ? 0.0f : static_cast<float>(z);
    if (flip && labels.size() > 1) {
      std::vector<Label> others;
      for (Label l : labels)
        if (l != frame.labels[i]) others.push_back(l);
      if (!others.empty())
        frame.labels[i] = others[std::min(others.size() - 1, std::size_t(pick * double(others.size())))];
    }
  }
}

LabeledFrame render_frame(const SyntheticScene& scene, const Pose& camera_pose, const CameraIntrinsics& intrinsics,
                          const NoiseSpec& noise, std::uint64_t rng_seed) {
  LabeledFrame frame = SceneRenderer(scene).render(camera_pose, intrinsics);
  apply_noise(frame, noise, rng_seed, scene.labels());
  return frame;
}

const char* to_string(RecordStatus status) {
  switch (status) {
    case RecordStatus::Ok: return "ok";
    case RecordStatus::TrackingLost: return "tracking_lost";
    case RecordStatus::EmptyCrop: return "empty_crop";
    case RecordStatus::AllCandidatesFailed: return "all_candidates_failed";
  }
  return "unknown";
}

EvalRecord make_record(int frame, Label label, const Pose& estimate, const Pose& truth) {
  EvalRecord r;
  r.frame = frame;
  r.object_label = label;
  r.has_pose = true;
  r.error = pose_error(estimate, truth);
  r.success = is_success(r.error);
  const Vec3 dt = (estimate.translation() - truth.translation()) * 1000.0;
  const Vec3 angles = euler_zyx(truth.rotation_matrix().transpose() * estimate.rotation_matrix()) * 180.0 / M_PI;
  r.components << dt, angles;
  return r;
}

EvalRecord failure_record(int frame, Label label, RecordStatus status) {
  EvalRecord r;
  r.frame = frame;
  r.object_label = label;
  r.status = status;
  r.error = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  return r;
}

std::vector<EvalRecord> evaluate(const std::vector<std::pair<Label, Pose>>& estimates,
                                 const std::vector<std::pair<Label, Pose>>& truth, int frame) {
  std::vector<EvalRecord> out;
  for (const auto& [label, pose] : estimates) {
    auto it = std::find_if(truth.begin(), truth.end(), [&](const auto& t) { return t.first == label; });
    if (it == truth.end()) throw Error(ErrorKind::UnknownLabel, "no ground truth for label " + std::to_string(label));
    out.push_back(make_record(frame, label, pose, it->second));
  }
  return out;
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& stddev) {
  mean = stddev = 0.0;
  if (v.empty()) return;
  // shifted so identical samples give exactly zero spread
  const double shift = v[0];
  double d = 0.0;
  for (double x : v) d += x - shift;
  d /= double(v.size());
  for (double x : v) stddev += (x - shift - d) * (x - shift - d);
  stddev = std::sqrt(stddev / double(v.size()));
  mean = shift + d;
}

}  // namespace

EvalSummary summarize(const std::vector<EvalRecord>& records) {
  EvalSummary s;
  s.records = records.size();
  std::vector<double> t, a;
  std::map<Label, std::vector<Eigen::Matrix<double, 6, 1>>> by_label;
  for (const auto& r : records) {
    if (r.success) {
      ++s.successes;
      t.push_back(r.error.translation_norm * 1000.0);
      a.push_back(r.error.angle);
    }
    if (r.has_pose) by_label[r.object_label].push_back(r.components);
  }
  s.success_rate = records.empty() ? 0.0 : double(s.successes) / double(records.size());
  mean_std(t, s.translation_mean_mm, s.translation_std_mm);
  mean_std(a, s.angle_mean_deg, s.angle_std_deg);
  for (const auto& [label, comps] : by_label) {
    for (int axis = 0; axis < 6; ++axis) {
      std::vector<double> v;
      for (const auto& c : comps) v.push_back(c[axis]);
      double mean, sd;
      mean_std(v, mean, sd);
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      s.axis_range[axis] += *hi - *lo;
      s.axis_std[axis] += sd;
    }
  }
  if (!by_label.empty()) {
    s.axis_range /= double(by_label.size());
    s.axis_std /= double(by_label.size());
  }
  return s;
}

nlohmann::json summary_to_json(const EvalSummary& s) {
  auto axes = [](const Eigen::Matrix<double, 6, 1>& v) {
    return nlohmann::json{{"x_mm", v[0]},     {"y_mm", v[1]},      {"z_mm", v[2]},
                          {"roll_deg", v[3]}, {"pitch_deg", v[4]}, {"yaw_deg", v[5]}};
  };
  return {{"records", s.records},
          {"successes", s.successes},
          {"success_rate", s.success_rate},
          {"translation_mean_mm", s.translation_mean_mm},
          {"translation_std_mm", s.translation_std_mm},
          {"angle_mean_deg", s.angle_mean_deg},
          {"angle_std_deg", s.angle_std_deg},
          {"axis_range", axes(s.axis_range)},
          {"axis_std", axes(s.axis_std)},
          {"euler_convention", "intrinsic Z-Y-X (yaw, pitch, roll) of R_truth^T R_estimate"},
          {"success_rule", "translation < 50 mm and angle < 15 deg"},
          {"lost_frames", s.lost_frames},
          {"surfels", s.surfels}};
}

std::string records_csv(const std::vector<EvalRecord>& records) {
  std::ostringstream os;
  os << "frame,label,status,success,translation_mm,angle_deg,x_mm,y_mm,z_mm,roll_deg,pitch_deg,yaw_deg\n";
  char buf[64];
  for (const auto& r : records) {
    os << r.frame << ',' << r.object_label << ',' << to_string(r.status) << ',' << (r.success ? 1 : 0);
    if (r.has_pose) {
      std::snprintf(buf, sizeof buf, ",%.6f,%.6f", r.error.translation_norm * 1000.0, r.error.angle);
      os << buf;
      for (int k = 0; k < 6; ++k) {
        std::snprintf(buf, sizeof buf, ",%.6f", r.components[k]);
        os << buf;
      }
    } else {
      os << ",,,,,,,,";
    }
    os << '\n';
  }
  return os.str();
}

std::string histogram_csv(const std::vector<EvalRecord>& records) {
  std::ostringstream os;
  os << "metric,bin_start,bin_end,count\n";
  auto emit = [&](const char* metric, double width, auto value) {
    std::map<long, std::size_t> bins;
    std::size_t missing = 0;
    long top = 0;
    for (const auto& r : records) {
      if (!r.has_pose) {
        ++missing;
        continue;
      }
      const long b = long(std::floor(value(r) / width));
      ++bins[b];
      top = std::max(top, b);
    }
    char buf[96];
    if (!bins.empty())
      for (long b = 0; b <= top; ++b) {
        std::snprintf(buf, sizeof buf, "%s,%.2f,%.2f,%zu\n", metric, b * width, (b + 1) * width,
                      bins.count(b) ? bins[b] : std::size_t(0));
        os << buf;
      }
    if (missing) os << metric << ",none,none," << missing << '\n';
  };
  emit("translation_mm", 1.0, [](const EvalRecord& r) { return r.error.translation_norm * 1000.0; });
  emit("angle_deg", 0.25, [](const EvalRecord& r) { return r.error.angle; });
  return os.str();
}

void report(const std::vector<EvalRecord>& records, const EvalSummary& summary, const std::filesystem::path& dir) {
  if (records.empty()) throw Error(ErrorKind::InvalidArgument, "no records to report");
  try {
    std::filesystem::create_directories(dir);
  } catch (const std::filesystem::filesystem_error& e) {
    throw Error(ErrorKind::IoFailure, e.what());
  }
  write_file_atomic(dir / "records.csv", records_csv(records));
  write_json(dir / "summary.json", summary_to_json(summary));
  write_file_atomic(dir / "histogram.csv", histogram_csv(records));
}

BenchAssets prepare_assets(const SyntheticScene& scene, const PipelineConfig& config) {
  scene.validate();
  BenchAssets assets;
  const SceneRenderer renderer(scene);
  for (std::size_t k = 0; k < scene.trajectory.size(); ++k)
    assets.clean_frames.push_back(renderer.render(scene.trajectory[k], scene.intrinsics, static_cast<int>(k)));
  const auto& b = config.bench;
  for (const auto& o : scene.objects) {
    CandidateLibrary library = generate_candidate_library(o.mesh, b.library_azimuth_step, b.library_elevation_step,
                                                          b.library_distance, b.library_resolution, o.label);
    std::erase_if(library.views, [&](const CandidateCrop& c) { return c.viewpoint.elevation < b.library_min_elevation; });
    if (library.views.empty()) throw Error(ErrorKind::NoValidViews, "no candidate views above library_min_elevation");
    assets.libraries.push_back(std::move(library));
  }
  return assets;
}

PipelineResult run_pipeline(const SyntheticScene& scene, const BenchAssets& assets, const PipelineConfig& config,
                            std::uint64_t seed) {
  config.validate();
  scene.validate();
  if (scene.objects.empty()) throw Error(ErrorKind::InvalidArgument, "scene has no objects");
  if (assets.clean_frames.size() != scene.trajectory.size() || assets.libraries.size() != scene.objects.size())
    throw Error(ErrorKind::InvalidArgument, "bench assets do not match the scene");

  PipelineResult result;
  const std::size_t n = scene.trajectory.size();
  const auto labels = scene.labels();
  std::mt19937_64 seeds(seed);
  const bool noisy = config.noise.depth_sigma > 0 || config.noise.label_flip_rate > 0 || config.noise.dropout_rate > 0;
  const bool fused = config.bench.mode == PipelineMode::Fused;
  const int interval = config.bench.keyframe_interval;

  std::vector<std::optional<Pose>> priors(scene.objects.size());
  result.trajectory.assign(n, std::nullopt);
  std::optional<Pose> last, before_last;

  for (std::size_t k = 0; k < n; ++k) {
    LabeledFrame frame = assets.clean_frames[k];
    const std::uint64_t frame_seed = seeds();
    if (noisy) apply_noise(frame, config.noise, frame_seed, labels, config.fusion.max_range);
    const Pose& truth_pose = scene.trajectory[k];

    if (fused) {
      if (k == 0) {
        result.trajectory[k] = truth_pose;
      } else {
        Pose predicted = *last;
        if (before_last) predicted = (*last * before_last->inverse()) * *last;
        try {
          result.trajectory[k] = track_camera(result.map, frame, predicted, config.fusion).pose;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::TrackingLost) throw;
          ++result.summary.lost_frames;
        }
      }
      if (result.trajectory[k]) {
        integrate_frame(result.map, frame, *result.trajectory[k], config.fusion);
        before_last = last;
        last = result.trajectory[k];
      } else {
        result.map.frame_count++;
        before_last.reset();
      }
    }

    if ((k + 1) % std::size_t(interval) != 0) continue;
    const int frame_id = static_cast<int>(k);

    if (fused && !result.trajectory[k]) {
      for (const auto& o : scene.objects) result.records.push_back(failure_record(frame_id, o.label, RecordStatus::TrackingLost));
      continue;
    }
    const LabeledPointCloud cloud =
        fused ? extract_cloud(result.map, config.bench.min_confidence) : backproject(frame, config.fusion);
    const Pose viewer = fused ? *result.trajectory[k] : Pose::identity();

    for (std::size_t oi = 0; oi < scene.objects.size(); ++oi) {
      const SceneObject& obj = scene.objects[oi];
      const LabeledPointCloud crop = crop_by_label(cloud, obj.label);
      if (crop.empty()) {
        result.records.push_back(failure_record(frame_id, obj.label, RecordStatus::EmptyCrop));
        continue;
      }
      const std::optional<Pose> prior = (fused && config.bench.use_prior) ? priors[oi] : std::nullopt;
      try {
        const RegistrationResult reg =
            register_object(assets.libraries[oi].views, crop, prior, config.icp, config.pruning, viewer);
        if (fused) priors[oi] = reg.pose;
        const Pose estimate_in_camera = viewer * reg.pose;
        result.records.push_back(make_record(frame_id, obj.label, estimate_in_camera, truth_pose * obj.pose));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::AllCandidatesFailed) throw;
        result.records.push_back(failure_record(frame_id, obj.label, RecordStatus::AllCandidatesFailed));
      }
    }
  }

  const std::size_t lost = result.summary.lost_frames;
  result.summary = summarize(result.records);
  result.summary.lost_frames = lost;
  result.summary.surfels = result.map.size();
  return result;
}

PipelineResult run_pipeline(const SyntheticScene& scene, const PipelineConfig& config, std::uint64_t seed) {
  return run_pipeline(scene, prepare_assets(scene, config), config, seed);
}

}  // namespace semreg
