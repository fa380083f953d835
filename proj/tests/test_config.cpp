#include "doctest.h"

#include "semreg/common.hpp"
#include "semreg/config.hpp"
#include "semreg/io.hpp"
#include "test_support.hpp"

#include <filesystem>
#include <set>
#include <string>

using namespace semreg;
using namespace semreg::testing;
namespace fs = std::filesystem;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults are valid and every field is registered once") {
  const PipelineConfig c;
  CHECK_NOTHROW(c.validate());
  std::set<std::string> paths;
  for (const auto& f : config_fields()) {
    CHECK(paths.insert(f.path).second);
    CHECK_FALSE(f.range.empty());
    CHECK_FALSE(f.description.empty());
  }
  for (const char* p : {"camera.fx", "fusion.label_weight", "fusion.merge_depth_band", "icp.variant",
                        "pruning.max_angle", "noise.label_flip_rate", "bench.keyframe_interval", "seed", "threads"})
    CHECK(paths.count(p) == 1);
  CHECK(c.bench.keyframe_interval == 5);
  CHECK(c.raycast.resolution == 250);
}

TEST_CASE("json round trip covers every field") {
  PipelineConfig c;
  c.fusion.label_weight = 0.25;
  c.icp.max_iterations = 17;
  c.bench.mode = PipelineMode::SingleFrame;
  c.seed = 42;
  const auto j = config_to_json(c);
  PipelineConfig back;
  apply_config_json(back, j);
  CHECK(config_to_json(back) == j);
  CHECK(back.fusion.label_weight == 0.25);
  CHECK(back.bench.mode == PipelineMode::SingleFrame);
  for (const auto& f : config_fields()) {
    std::string pointer = "/" + f.path;
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    CHECK(j.contains(nlohmann::json::json_pointer(pointer)));
  }
}

TEST_CASE("partial documents override only what they name") {
  PipelineConfig c;
  apply_config_json(c, nlohmann::json::parse(R"({"noise":{"depth_sigma":0.003},"icp":{"variant":"point_to_point"}})"));
  CHECK(c.noise.depth_sigma == 0.003);
  CHECK(c.noise.label_flip_rate == 0.0);
  CHECK(c.icp.variant == IcpVariant::PointToPoint);
  CHECK(c.fusion.merge_radius == PipelineConfig{}.fusion.merge_radius);
}

TEST_CASE("violations name the field path") {
  PipelineConfig c;
  auto bad = [&](const char* doc) { return message_of([&] { apply_config_json(c, nlohmann::json::parse(doc)); }); };
  CHECK(bad(R"({"noise":{"label_flip_rate":1.5}})").find("noise.label_flip_rate") != std::string::npos);
  CHECK(bad(R"({"icp":{"max_iterations":0}})").find("icp.max_iterations") != std::string::npos);
  CHECK(bad(R"({"fusion":{"merge_radius":"big"}})").find("fusion.merge_radius") != std::string::npos);
  CHECK(bad(R"({"fusion":{"nope":1}})").find("fusion.nope") != std::string::npos);
  CHECK(bad(R"({"bench":{"mode":"sideways"}})").find("bench.mode") != std::string::npos);
  CHECK(bad(R"({"camera":3})").find("camera") != std::string::npos);

  CHECK(thrown_kind([&] { apply_config_json(c, nlohmann::json::parse(R"({"noise":{"depth_sigma":-1}})")); }) ==
        ErrorKind::InvalidArgument);
  CHECK(thrown_kind([&] { apply_config_json(c, nlohmann::json::parse(R"({"noise":{"depth_sigma":true}})")); }) ==
        ErrorKind::ParseError);
  CHECK(thrown_kind([&] { apply_config_json(c, nlohmann::json::parse(R"({"extra":1})")); }) == ErrorKind::ParseError);
  CHECK(thrown_kind([&] { apply_config_json(c, nlohmann::json::parse(R"({"bench":{"runs":2.5}})")); }) ==
        ErrorKind::ParseError);
  CHECK(thrown_kind([&] { apply_config_json(c, nlohmann::json::parse(R"({"seed":-3})")); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("cross-field validation") {
  PipelineConfig c;
  c.camera.width = 0;
  CHECK(message_of([&] { c.validate(); }).find("camera") != std::string::npos);
}

TEST_CASE("flag overrides") {
  PipelineConfig c;
  apply_config_override(c, "fusion.label_weight=0.5");
  apply_config_override(c, "bench.mode=single-frame");
  apply_config_override(c, "bench.use_prior=false");
  apply_config_override(c, "seed=9");
  CHECK(c.fusion.label_weight == 0.5);
  CHECK(c.bench.mode == PipelineMode::SingleFrame);
  CHECK_FALSE(c.bench.use_prior);
  CHECK(c.seed == 9);
  CHECK(thrown_kind([&] { apply_config_override(c, "no_equals"); }) == ErrorKind::InvalidArgument);
  CHECK(thrown_kind([&] { apply_config_override(c, "icp.bogus=1"); }) == ErrorKind::InvalidArgument);
  CHECK(thrown_kind([&] { apply_config_override(c, "icp.max_iterations=-2"); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("config files") {
  const fs::path dir = fs::temp_directory_path() / "semreg_config_test";
  fs::create_directories(dir);
  write_file_atomic(dir / "ok.json", R"({"bench":{"keyframe_interval":3}})");
  CHECK(load_config(dir / "ok.json").bench.keyframe_interval == 3);
  write_file_atomic(dir / "broken.json", R"({"bench":)");
  CHECK(thrown_kind([&] { load_config(dir / "broken.json"); }) == ErrorKind::ParseError);
  CHECK(thrown_kind([&] { load_config(dir / "missing.json"); }) == ErrorKind::IoFailure);
  fs::remove_all(dir);
}

TEST_CASE("field description lists defaults and ranges") {
  const std::string text = describe_config_fields();
  for (const auto& f : config_fields()) {
    const auto at = text.find("  " + f.path + " ");
    REQUIRE(at != std::string::npos);
    const auto line = text.substr(at, text.find('\n', at) - at);
    CHECK(line.find("default " + f.get(PipelineConfig{}).dump()) != std::string::npos);
    CHECK(line.find("range " + f.range) != std::string::npos);
  }
}

TEST_CASE("calibration bounds follow the settings") {
  PipelineConfig c;
  CameraModel m;
  m.intrinsics = c.camera;
  const CalibrationBounds b = calibration_bounds(c, m);
  const auto lo = b.lower, hi = b.upper;
  CHECK(lo.size() == 14);
  for (int i = 0; i < 14; ++i) CHECK(lo[i] < hi[i]);
}
