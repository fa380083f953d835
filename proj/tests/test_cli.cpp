#include "doctest.h"

#include "calibration_fixture.hpp"
#include "semreg/bench.hpp"
#include "semreg/config.hpp"
#include "semreg/io.hpp"
#include "semreg/raycast.hpp"
#include "test_support.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace semreg;
using namespace semreg::testing;
namespace fs = std::filesystem;

#ifndef SEMREG_CLI
#error "SEMREG_CLI must name the semreg binary"
#endif

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("semreg_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run run(const fs::path& dir, const std::string& args, const std::string& env = "") {
  const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" SEMREG_CLI "' " + args + " > stdout.txt 2> stderr.txt";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(dir / "stdout.txt");
  r.err = read_file(dir / "stderr.txt");
  return r;
}

// every regular file under a, relative path -> bytes
std::map<std::string, std::string> tree(const fs::path& a) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) files[fs::relative(e.path(), a).string()] = read_file(e.path());
  return files;
}

void small_scene(const fs::path& dir, int frames) {
  SyntheticScene scene = demo_scene();
  scene.trajectory.resize(frames);
  scene.intrinsics.width = 320;
  scene.intrinsics.height = 240;
  scene.intrinsics.f = Vec2(262.5, 262.5);
  scene.intrinsics.c = Vec2(159.5, 119.5);
  save_scene(dir / "scene", scene);
}

}  // namespace

TEST_CASE("help lists every config field with default and range") {
  const fs::path dir = scratch("help");
  const PipelineConfig defaults;
  for (const char* sub : {"calibrate", "raycast", "fuse", "register", "bench", "render", "demo-scene"}) {
    const Run r = run(dir, std::string(sub) + " --help");
    REQUIRE(r.code == 0);
    for (const auto& f : config_fields()) {
      const auto at = r.out.find("  " + f.path + " ");
      REQUIRE_MESSAGE(at != std::string::npos, sub << " --help misses " << f.path);
      const std::string line = r.out.substr(at, r.out.find('\n', at) - at);
      CHECK(line.find("default " + f.get(defaults).dump()) != std::string::npos);
      CHECK(line.find("range " + f.range) != std::string::npos);
    }
  }
  CHECK(run(dir, "").code == 1);
  CHECK(run(dir, "frobnicate").code == 1);
}

TEST_CASE("calibrate") {
  const fs::path dir = scratch("calibrate");
  const CameraModel truth = reference_camera();
  write_observations_csv(dir / "obs.csv", synthetic_observations(truth, 480, 0.0, 1));
  write_json(dir / "initial.json", camera_to_json(perturbed(truth, 0.05, 2)));
  const Run ok = run(dir, "calibrate obs.csv --initial initial.json -o result.json");
  CHECK(ok.code == 0);
  const auto result = read_json(dir / "result.json");
  CHECK(result["mean_pixel_error"].get<double>() < 1e-6);
  CHECK(max_relative_error(camera_from_json(result["camera"]), truth) < 1e-3);
  const std::string first = read_file(dir / "result.json");
  CHECK(run(dir, "calibrate obs.csv --initial initial.json -o result.json").code == 0);
  CHECK(read_file(dir / "result.json") == first);

  CHECK(run(dir, "calibrate obs.csv --initial initial.json -o capped.json --set calibration.max_iterations=1").code == 2);

  write_observations_csv(dir / "five.csv", synthetic_observations(truth, 5, 0.0, 1));
  const Run few = run(dir, "calibrate five.csv --initial initial.json -o x.json");
  CHECK(few.code == 1);
  CHECK(few.err.find("InsufficientObservations") != std::string::npos);

  write_file_atomic(dir / "bad.json", R"({"calibration": {"bound_distortion": "wide"}})");
  const Run bad = run(dir, "calibrate obs.csv --initial initial.json -o x.json --config bad.json");
  CHECK(bad.code == 1);
  CHECK(bad.err.find("calibration.bound_distortion") != std::string::npos);
  write_file_atomic(dir / "broken.json", R"({"calibration": )");
  CHECK(run(dir, "calibrate obs.csv -o x.json", "SEMREG_CONFIG=broken.json").code == 1);
}

TEST_CASE("raycast") {
  const fs::path dir = scratch("raycast");
  write_obj(dir / "cube.obj", make_box(Vec3(0.1, 0.1, 0.1)));
  const Run r = run(dir, "raycast cube.obj -o lib --set raycast.azimuth_step=30 --set raycast.elevation_step=30 "
                         "--set raycast.resolution=100");
  REQUIRE(r.code == 0);
  std::size_t plys = 0;
  for (const auto& e : fs::directory_iterator(dir / "lib")) plys += e.path().extension() == ".ply";
  CHECK(plys == 84);
  CHECK(fs::exists(dir / "lib" / "index.json"));
  CHECK(r.out.find("views 84") != std::string::npos);
  const auto first = tree(dir / "lib");
  REQUIRE(run(dir, "raycast cube.obj -o lib --set raycast.azimuth_step=30 --set raycast.elevation_step=30 "
                   "--set raycast.resolution=100")
              .code == 0);
  CHECK(tree(dir / "lib") == first);
  CHECK(run(dir, "raycast cube.obj -o near --set raycast.distance=0.05").code == 1);
  CHECK(run(dir, "raycast missing.obj -o x").code == 1);
}

TEST_CASE("render and fuse") {
  const fs::path dir = scratch("fuse");
  small_scene(dir, 6);
  REQUIRE(run(dir, "render scene/scene.json -o frames --seed 5").code == 0);
  const auto frames = tree(dir / "frames");
  REQUIRE(run(dir, "render scene/scene.json -o frames --seed 5").code == 0);
  CHECK(tree(dir / "frames") == frames);

  const Run r = run(dir, "fuse frames -o fused");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("surfels") != std::string::npos);
  const auto traj = read_json(dir / "fused" / "trajectory.json");
  CHECK(traj["lost_frames"] == 0);
  CHECK(read_ply(dir / "fused" / "cloud.ply").size() > 10000);
  const auto fused = tree(dir / "fused");
  REQUIRE(run(dir, "fuse frames -o fused --threads 2").code == 0);
  CHECK(tree(dir / "fused") == fused);

  fs::create_directories(dir / "empty");
  CHECK(run(dir, "fuse empty -o x").code == 1);

  // tracking gate below the noise floor: every frame after the first is lost
  REQUIRE(run(dir, "render scene/scene.json -o noisy --set noise.depth_sigma=0.003").code == 0);
  const Run lost = run(dir, "fuse noisy -o degraded --set fusion.tracking_lost_rms=0.0005");
  CHECK(lost.code == 3);
  CHECK(lost.err.find("TrackingLost") != std::string::npos);
  CHECK(read_json(dir / "degraded" / "trajectory.json")["lost_frames"] == 5);
}

TEST_CASE("register") {
  const fs::path dir = scratch("register");
  // tilted so no face is vertical: a crop seeing only vertical faces leaves z pinned by its
  // silhouette alone and can tie on fitness while sliding about one sample spacing
  const TriangleMesh mesh = transform(asymmetric_object(), Pose::from_axis_angle(Vec3(1, 0.4, 0), 0.45));
  write_obj(dir / "object.obj", mesh);
  const std::string grid = "--set raycast.azimuth_step=30 --set raycast.elevation_step=30 --set raycast.resolution=120 "
                           "--set raycast.label=3";
  REQUIRE(run(dir, "raycast object.obj -o lib " + grid).code == 0);

  // scene: the object seen all round from off-grid viewpoints, placed in the world
  const Pose world_from_object = Pose::from_axis_angle(Vec3(0.2, 0.1, 1), 0.9, Vec3(0.3, -0.1, 0.05));
  const double radius = mesh.bounding_radius(Vec3::Zero());
  const CameraModel cam = view_camera({55, 35, 0.8}, Vec3::Zero(), radius, 250);
  LabeledPointCloud view;
  for (double el : {35.0, -35.0})
    for (double az : {10.0, 100.0, 190.0, 280.0}) {
      const LabeledPointCloud part = raycast_view(mesh, view_camera({az, el, 0.8}, Vec3::Zero(), radius, 160), 3);
      for (std::size_t i = 0; i < part.size(); ++i) view.push_back(part.points[i], 3, part.normals[i]);
    }
  for (std::size_t i = 0; i < view.size(); ++i) {
    view.points[i] = world_from_object.transform_point(view.points[i]);
    view.normals[i] = world_from_object.rotate(view.normals[i]);
  }
  write_ply(dir / "scene.ply", view);
  write_json(dir / "viewer.json", pose_to_json(cam.extrinsics * world_from_object.inverse()));

  const Run r = run(dir, "register scene.ply lib --label 3 --viewer viewer.json -o result.json");
  REQUIRE(r.code == 0);
  const auto result = read_json(dir / "result.json");
  CHECK(result["fitness"].get<double>() >= 0.95);
  const Pose exhaustive = pose_from_json(result["pose"]);
  CHECK(pose_error(exhaustive, world_from_object).translation_norm < 0.005);
  CHECK(pose_error(exhaustive, world_from_object).angle < 2.0);

  write_json(dir / "prior.json", pose_to_json(exhaustive * Pose::from_axis_angle(Vec3(1, 0, 0), rad(2), Vec3(0.003, 0, 0))));
  REQUIRE(run(dir, "register scene.ply lib --label 3 --viewer viewer.json --prior prior.json -o pruned.json").code == 0);
  const std::string first = read_file(dir / "pruned.json");
  REQUIRE(run(dir, "register scene.ply lib --label 3 --viewer viewer.json --prior prior.json -o pruned.json").code == 0);
  CHECK(read_file(dir / "pruned.json") == first);
  const auto pruned = read_json(dir / "pruned.json");
  const PoseError e = pose_error(pose_from_json(pruned["pose"]), exhaustive);
  CHECK(e.translation_norm < 0.001);
  CHECK(e.angle < 0.1);
  CHECK(pruned["icp_calls"].get<int>() < result["icp_calls"].get<int>());

  CHECK(run(dir, "register scene.ply lib --label 4 -o x.json").code == 1);
  CHECK(run(dir, "register scene.ply lib --label 3 -o x.json --set icp.correspondence_max_distance=0.000001").code == 2);
  LabeledPointCloud bare = view;
  bare.normals.clear();
  write_ply(dir / "bare.ply", bare);
  const Run no_normals = run(dir, "register bare.ply lib --label 3 -o x.json --set icp.variant=point_to_plane");
  CHECK(no_normals.code == 1);
  CHECK(no_normals.err.find("normals") != std::string::npos);
  CHECK(run(dir, "register bare.ply lib --label 3 --prior prior.json -o bare.json --set icp.variant=point_to_point").code == 0);
}

TEST_CASE("bench") {
  const fs::path dir = scratch("bench");
  small_scene(dir, 5);
  const std::string args = "bench scene/scene.json -o report --seed 2 --set bench.library_resolution=48";
  const Run r = run(dir, args);
  REQUIRE(r.code == 0);
  const auto summary = read_json(dir / "report" / "summary.json");
  CHECK(summary["success_rate"].get<double>() == 1.0);
  CHECK(summary["mode"] == "fused");
  CHECK(r.out.find("success_rate") != std::string::npos);
  CHECK(fs::exists(dir / "report" / "records.csv"));
  CHECK(fs::exists(dir / "report" / "histogram.csv"));
  const auto first = tree(dir / "report");
  REQUIRE(run(dir, args).code == 0);
  CHECK(tree(dir / "report") == first);

  const std::string noisy = args + " --set noise.depth_sigma=0.003 --set noise.label_flip_rate=0.02 --runs 2";
  REQUIRE(run(dir, noisy + " --mode single-frame").code == 0);
  const auto noisy_first = tree(dir / "report");
  REQUIRE(run(dir, noisy + " --mode single-frame").code == 0);
  CHECK(tree(dir / "report") == noisy_first);
  CHECK(read_json(dir / "report" / "summary.json")["mode"] == "single-frame");

  CHECK(run(dir, "bench scene/scene.json -o r2 --mode sideways").code == 1);
  CHECK(run(dir, "bench scene/scene.json -o r2 --set bench.keyframe_interval=0").code == 1);
}

TEST_CASE("demo scene") {
  const fs::path dir = scratch("demo");
  REQUIRE(run(dir, "demo-scene -o a").code == 0);
  REQUIRE(run(dir, "demo-scene -o b").code == 0);
  CHECK(tree(dir / "a") == tree(dir / "b"));
  CHECK(load_scene(dir / "a" / "scene.json").objects.size() == 3);
}
