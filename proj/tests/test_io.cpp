#include "doctest.h"
#include "test_support.hpp"

#include "semreg/common.hpp"
#include "semreg/io.hpp"

#include <filesystem>

using namespace semreg;

TEST_CASE("PLY encode/decode preserves float32 geometry and labels") {
  std::mt19937_64 rng(31);
  LabeledPointCloud cloud;
  for (int i = 0; i < 200; ++i) cloud.push_back(Vec3::Random(), static_cast<Label>(i % 7 * 9000 % 65536), testing::random_unit(rng));
  for (auto format : {PlyFormat::Ascii, PlyFormat::BinaryLittleEndian}) {
    const auto back = decode_ply(encode_ply(cloud, format));
    REQUIRE(back.size() == cloud.size());
    CHECK(back.labels == cloud.labels);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        CHECK(back.points[i][k] == static_cast<double>(static_cast<float>(cloud.points[i][k])));
        CHECK(std::abs(back.normals[i][k] - cloud.normals[i][k]) < 1e-6);
      }
    }
  }
  LabeledPointCloud plain;
  plain.push_back(Vec3(1, 2, 3), 4);
  const auto text = encode_ply(plain, PlyFormat::Ascii);
  CHECK(text.find("property ushort label") != std::string::npos);
  CHECK(text.find("nx") == std::string::npos);
  CHECK_FALSE(decode_ply(text).has_normals());
}

TEST_CASE("PLY reader accepts foreign property layouts") {
  const std::string text =
      "ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty double z\nproperty double y\n"
      "property double x\nproperty uchar red\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n"
      "3 2 1 255\n6 5 4 0\n";
  const auto c = decode_ply(text);
  REQUIRE(c.size() == 2);
  CHECK(c.points[0] == Vec3(1, 2, 3));
  CHECK(c.labels[1] == 0);
  CHECK_THROWS_AS(decode_ply("ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nend_header\n"), Error);
}

TEST_CASE("pose JSON layout is scalar-first") {
  const Pose p(Quat(0.5, 0.5, 0.5, 0.5), Vec3(1, 2, 3));
  const auto j = pose_to_json(p);
  CHECK(j["q"][0].get<double>() == doctest::Approx(0.5));
  CHECK(j["t"][2].get<double>() == 3.0);
  const Pose back = pose_from_json(j);
  CHECK(quaternion_angle(back.rotation(), p.rotation()) < 1e-9);
  CHECK_THROWS_AS(pose_from_json(nlohmann::json{{"q", {1, 0, 0}}, {"t", {0, 0, 0}}}), Error);
}

TEST_CASE("16-bit PNG round trip and atomic writes") {
  const auto dir = std::filesystem::temp_directory_path() / "semreg_test_png";
  std::filesystem::remove_all(dir);
  Image16 img{7, 3, {}};
  for (int i = 0; i < 21; ++i) img.pixels.push_back(static_cast<std::uint16_t>(i * 3121));
  write_png16(dir / "a.png", img);
  const auto back = read_png16(dir / "a.png");
  CHECK(back.width == 7);
  CHECK(back.height == 3);
  CHECK(back.pixels == img.pixels);
  write_file_atomic(dir / "x.txt", "hello");
  CHECK(read_file(dir / "x.txt") == "hello");
  CHECK_FALSE(std::filesystem::exists(dir / "x.txt.tmp"));
  CHECK_THROWS_AS(read_file(dir / "missing"), Error);
}
