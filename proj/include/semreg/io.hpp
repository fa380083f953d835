#pragma once

#include "semreg/geometry.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace semreg {

enum class PlyFormat { Ascii, BinaryLittleEndian };

/// Labeled PLY: float32 x y z, optional float32 nx ny nz, uint16 label.
std::string encode_ply(const LabeledPointCloud& cloud, PlyFormat format = PlyFormat::BinaryLittleEndian);
LabeledPointCloud decode_ply(const std::string& bytes);
void write_ply(const std::filesystem::path& path, const LabeledPointCloud& cloud,
               PlyFormat format = PlyFormat::BinaryLittleEndian);
LabeledPointCloud read_ply(const std::filesystem::path& path);

/// {"q":[w,x,y,z],"t":[x,y,z]}
nlohmann::json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);
/// Pretty JSON with a trailing newline, written atomically.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

struct Image16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> pixels;  // row-major
};

void write_png16(const std::filesystem::path& path, const Image16& image);
Image16 read_png16(const std::filesystem::path& path);

}  // namespace semreg
