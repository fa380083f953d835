#include "semreg/bench.hpp"
#include "semreg/calibration.hpp"
#include "semreg/common.hpp"
#include "semreg/config.hpp"
#include "semreg/fusion.hpp"
#include "semreg/io.hpp"
#include "semreg/raycast.hpp"
#include "semreg/registration.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

using namespace semreg;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kInputError = 1, kAlgorithmFailure = 2, kDegraded = 3 };

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<int> threads;
  std::optional<long long> seed;
};

void add_common(CLI::App* cmd, Common& common) {
  if (const char* env = std::getenv("SEMREG_CONFIG")) common.config_path = env;
  cmd->add_option("--config", common.config_path, "JSON config file (default: $SEMREG_CONFIG)");
  cmd->add_option("--set", common.overrides, "override a config field, path=value (repeatable, wins over --config)");
  cmd->add_option("--threads", common.threads, "worker threads, 0 = hardware concurrency");
  cmd->add_option("--seed", common.seed, "top-level random seed");
  cmd->footer("Config fields (set in the --config file or with --set path=value):\n" + describe_config_fields());
}

PipelineConfig resolve(const Common& common) {
  PipelineConfig config;
  if (!common.config_path.empty()) apply_config_json(config, read_json(common.config_path));
  for (const auto& o : common.overrides) apply_config_override(config, o);
  if (common.threads) apply_config_override(config, "threads=" + std::to_string(*common.threads));
  if (common.seed) apply_config_override(config, "seed=" + std::to_string(*common.seed));
  config.validate();
  set_num_threads(config.threads);
  return config;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::AllCandidatesFailed:
    case ErrorKind::NoCorrespondences:
    case ErrorKind::TrackingLost:
      return kAlgorithmFailure;
    default:
      return kInputError;
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

json registration_json(const RegistrationResult& r, Label label) {
  return {{"label", label},
          {"pose", pose_to_json(r.pose)},
          {"fitness", r.fitness},
          {"rmse", r.rmse},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"candidate_index", r.candidate_index},
          {"icp_calls", r.icp_calls}};
}

// --- calibrate

struct CalibrateArgs {
  std::string observations;
  std::string initial;
  std::string output;
};

int run_calibrate(const Common& common, const CalibrateArgs& a) {
  const PipelineConfig config = resolve(common);
  const auto obs = read_observations_csv(a.observations);
  CameraModel initial;
  initial.intrinsics = config.camera;
  if (!a.initial.empty()) initial = camera_from_json(read_json(a.initial));
  const CalibrationResult r = calibrate(obs, initial, calibration_bounds(config, initial), config.calibration.optimizer);
  json out = {{"camera", camera_to_json(r.model)},
              {"mean_pixel_error", r.mean_pixel_error},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"observations", obs.size()},
              {"cost_history", r.cost_history}};
  write_json(a.output, out);
  std::printf("mean pixel error %.6g px after %d iterations%s\n", r.mean_pixel_error, r.iterations,
              r.converged ? "" : " (did not converge)");
  return r.converged ? kOk : kAlgorithmFailure;
}

// --- raycast

struct RaycastArgs {
  std::string mesh;
  std::string output;
};

int run_raycast(const Common& common, const RaycastArgs& a) {
  const PipelineConfig config = resolve(common);
  const auto& s = config.raycast;
  const TriangleMesh mesh = read_mesh(a.mesh);
  const CandidateLibrary lib =
      generate_candidate_library(mesh, s.azimuth_step, s.elevation_step, s.distance, s.resolution, s.label);
  ensure_dir(a.output);
  save_library(a.output, lib);
  std::printf("views %zu skipped %d\n", lib.views.size(), lib.skipped_views);
  return kOk;
}

// --- fuse

struct FuseArgs {
  std::string frames;
  std::string output;
};

int run_fuse(const Common& common, const FuseArgs& a) {
  const PipelineConfig config = resolve(common);
  const FrameSequence seq = load_frames(a.frames);
  for (const auto& f : seq.frames) f.validate(config.fusion.max_range);
  SurfelMap map;
  std::vector<std::optional<Pose>> trajectory(seq.frames.size());
  std::optional<Pose> last, before_last;
  std::size_t lost = 0;
  for (std::size_t k = 0; k < seq.frames.size(); ++k) {
    const LabeledFrame& frame = seq.frames[k];
    if (k == 0) {
      trajectory[k] = seq.poses ? (*seq.poses)[0] : Pose::identity();
    } else if (!last) {
      // nothing to track against until a frame is placed
      ++lost;
    } else {
      Pose predicted = *last;
      if (before_last) predicted = (*last * before_last->inverse()) * *last;
      try {
        trajectory[k] = track_camera(map, frame, predicted, config.fusion).pose;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::TrackingLost) throw;
        std::fprintf(stderr, "frame %zu: %s\n", k, e.what());
        ++lost;
      }
    }
    if (trajectory[k]) {
      integrate_frame(map, frame, *trajectory[k], config.fusion);
      before_last = last;
      last = trajectory[k];
    } else {
      map.frame_count++;
      before_last.reset();
    }
  }
  const LabeledPointCloud cloud = extract_cloud(map, config.bench.min_confidence);
  ensure_dir(a.output);
  write_ply(fs::path(a.output) / "cloud.ply", cloud);
  json poses = json::array();
  for (const auto& p : trajectory) poses.push_back(p ? pose_to_json(*p) : json(nullptr));
  write_json(fs::path(a.output) / "trajectory.json",
             {{"poses", poses}, {"lost_frames", lost}, {"surfels", map.size()}, {"points", cloud.size()}});
  std::printf("surfels %zu points %zu lost %zu/%zu\n", map.size(), cloud.size(), lost, seq.frames.size());
  return 2 * lost > seq.frames.size() ? kDegraded : kOk;
}

// --- register

struct RegisterArgs {
  std::string scene;
  std::string library;
  int label = 1;
  std::string prior;
  std::string viewer;
  std::string output;
};

int run_register(const Common& common, const RegisterArgs& a) {
  const PipelineConfig config = resolve(common);
  if (a.label < 1 || a.label > 65535) throw Error(ErrorKind::InvalidArgument, "--label must be in [1, 65535]");
  const LabeledPointCloud scene = read_ply(a.scene);
  const CandidateLibrary lib = load_library(a.library);
  const LabeledPointCloud crop = crop_by_label(scene, static_cast<Label>(a.label));
  if (crop.empty()) throw Error(ErrorKind::EmptyCrop, "no scene points carry label " + std::to_string(a.label));
  if (config.icp.variant == IcpVariant::PointToPlane && !crop.has_normals())
    throw Error(ErrorKind::InvalidArgument,
                "icp.variant point_to_plane needs scene normals; the PLY has none (use --set icp.variant=point_to_point)");
  std::optional<Pose> prior;
  if (!a.prior.empty()) prior = pose_from_json(read_json(a.prior));
  const Pose viewer = a.viewer.empty() ? Pose::identity() : pose_from_json(read_json(a.viewer));
  const RegistrationResult r = register_object(lib.views, crop, prior, config.icp, config.pruning, viewer);
  write_json(a.output, registration_json(r, static_cast<Label>(a.label)));
  std::printf("fitness %.6f rmse %.6g m candidate %zu icp calls %zu\n", r.fitness, r.rmse, r.candidate_index,
              r.icp_calls);
  return kOk;
}

// --- bench

struct BenchArgs {
  std::string scene;
  std::string output;
  std::string mode;
  int runs = 0;
};

int run_bench(const Common& common, const BenchArgs& a) {
  PipelineConfig config = resolve(common);
  if (!a.mode.empty()) apply_config_override(config, "bench.mode=\"" + a.mode + "\"");
  if (a.runs > 0) config.bench.runs = a.runs;
  const SyntheticScene scene = load_scene(a.scene);
  const BenchAssets assets = prepare_assets(scene, config);
  std::vector<EvalRecord> all;
  std::size_t lost = 0, surfels = 0;
  json runs = json::array();
  for (int r = 0; r < config.bench.runs; ++r) {
    const std::uint64_t seed = config.seed + std::uint64_t(r);
    const PipelineResult result = run_pipeline(scene, assets, config, seed);
    all.insert(all.end(), result.records.begin(), result.records.end());
    lost += result.summary.lost_frames;
    surfels = result.summary.surfels;
    json s = summary_to_json(result.summary);
    s["seed"] = seed;
    runs.push_back(s);
  }
  EvalSummary summary = summarize(all);
  summary.lost_frames = lost;
  summary.surfels = surfels;
  report(all, summary, a.output);
  json out = summary_to_json(summary);
  out["mode"] = to_string(config.bench.mode);
  out["runs"] = runs;
  write_json(fs::path(a.output) / "summary.json", out);
  std::cout << out.dump(2) << "\n";
  return kOk;
}

// --- render / demo-scene

struct RenderArgs {
  std::string scene;
  std::string output;
};

int run_render(const Common& common, const RenderArgs& a) {
  const PipelineConfig config = resolve(common);
  const SyntheticScene scene = load_scene(a.scene);
  const SceneRenderer renderer(scene);
  std::mt19937_64 seeds(config.seed);
  std::vector<LabeledFrame> frames;
  for (std::size_t k = 0; k < scene.trajectory.size(); ++k) {
    LabeledFrame f = renderer.render(scene.trajectory[k], scene.intrinsics, static_cast<int>(k));
    apply_noise(f, config.noise, seeds(), scene.labels(), config.fusion.max_range);
    frames.push_back(std::move(f));
  }
  ensure_dir(a.output);
  save_frames(a.output, frames, &scene.trajectory);
  std::printf("frames %zu\n", frames.size());
  return kOk;
}

int run_demo_scene(const Common& common, const std::string& output) {
  resolve(common);
  ensure_dir(output);
  save_scene(output, demo_scene());
  std::printf("wrote %s\n", (fs::path(output) / "scene.json").c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic object registration against fused depth maps"};
  app.require_subcommand(1);
  app.footer("Every subcommand's --help lists all config fields with defaults and ranges.");

  Common common;
  std::function<int()> action;

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "estimate camera intrinsics and extrinsics from X,Y,Z,u,v observations");
  c->add_option("observations", cal.observations, "observation CSV")->required()->check(CLI::ExistingFile);
  c->add_option("--initial", cal.initial, "initial camera JSON {intrinsics, extrinsics} (default: config camera)");
  c->add_option("-o,--output", cal.output, "result JSON")->required();
  add_common(c, common);
  c->callback([&] { action = [&] { return run_calibrate(common, cal); }; });

  RaycastArgs ray;
  auto* r = app.add_subcommand("raycast", "render a candidate library of view-dependent crops from a mesh");
  r->add_option("mesh", ray.mesh, "OBJ/STL/PLY mesh")->required()->check(CLI::ExistingFile);
  r->add_option("-o,--output", ray.output, "library directory")->required();
  add_common(r, common);
  r->callback([&] { action = [&] { return run_raycast(common, ray); }; });

  FuseArgs fuse;
  auto* f = app.add_subcommand("fuse", "track and fuse a labeled depth sequence into a surfel map");
  f->add_option("frames", fuse.frames, "frame directory (NNNN.depth.png, NNNN.labels.png, camera.json)")->required();
  f->add_option("-o,--output", fuse.output, "output directory (cloud.ply, trajectory.json)")->required();
  add_common(f, common);
  f->callback([&] { action = [&] { return run_fuse(common, fuse); }; });

  RegisterArgs reg;
  auto* g = app.add_subcommand("register", "register one labeled object against a scene cloud");
  g->add_option("scene", reg.scene, "scene PLY with labels")->required()->check(CLI::ExistingFile);
  g->add_option("library", reg.library, "candidate library directory")->required();
  g->add_option("--label", reg.label, "object label to crop")->required();
  g->add_option("--prior", reg.prior, "prior object pose JSON (enables pruning)");
  g->add_option("--viewer", reg.viewer, "observing camera pose JSON (camera-from-world)");
  g->add_option("-o,--output", reg.output, "result JSON")->required();
  add_common(g, common);
  g->callback([&] { action = [&] { return run_register(common, reg); }; });

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "run the synthetic end-to-end benchmark");
  b->add_option("scene", bench.scene, "scene JSON")->required()->check(CLI::ExistingFile);
  b->add_option("-o,--output", bench.output, "report directory")->required();
  b->add_option("--mode", bench.mode, "fused|single-frame (overrides bench.mode)")
      ->check(CLI::IsMember({"fused", "single-frame"}));
  b->add_option("--runs", bench.runs, "seeded runs (overrides bench.runs)")->check(CLI::PositiveNumber);
  add_common(b, common);
  b->callback([&] { action = [&] { return run_bench(common, bench); }; });

  RenderArgs render;
  auto* d = app.add_subcommand("render", "render a scene's trajectory to a frame directory, with configured noise");
  d->add_option("scene", render.scene, "scene JSON")->required()->check(CLI::ExistingFile);
  d->add_option("-o,--output", render.output, "frame directory")->required();
  add_common(d, common);
  d->callback([&] { action = [&] { return run_render(common, render); }; });

  std::string demo_out;
  auto* e = app.add_subcommand("demo-scene", "write the built-in three-object scene");
  e->add_option("-o,--output", demo_out, "scene directory")->required();
  add_common(e, common);
  e->callback([&] { action = [&] { return run_demo_scene(common, demo_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kInputError;
  }
  try {
    return action();
  } catch (const Error& err) {
    std::fprintf(stderr, "semreg: %s\n", err.what());
    return exit_code(err.kind());
  } catch (const std::exception& err) {
    std::fprintf(stderr, "semreg: %s\n", err.what());
    return kInputError;
  }
}
