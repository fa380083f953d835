#include "semreg/io.hpp"

#include "semreg/common.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace semreg {

namespace {

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

struct PlyProperty {
  std::string name;
  std::string type;
};

std::size_t type_size(const std::string& t) {
  static const std::map<std::string, std::size_t> sizes = {
      {"char", 1},   {"int8", 1},    {"uchar", 1},  {"uint8", 1},  {"short", 2},  {"int16", 2},
      {"ushort", 2}, {"uint16", 2},  {"int", 4},    {"int32", 4},  {"uint", 4},   {"uint32", 4},
      {"float", 4},  {"float32", 4}, {"double", 8}, {"float64", 8}};
  auto it = sizes.find(t);
  if (it == sizes.end()) throw Error(ErrorKind::ParseError, "PLY: unsupported property type '" + t + "'");
  return it->second;
}

double read_binary_value(const char* p, const std::string& t) {
  auto get = [p]<typename T>(T) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  if (t == "char" || t == "int8") return get(std::int8_t{});
  if (t == "uchar" || t == "uint8") return get(std::uint8_t{});
  if (t == "short" || t == "int16") return get(std::int16_t{});
  if (t == "ushort" || t == "uint16") return get(std::uint16_t{});
  if (t == "int" || t == "int32") return get(std::int32_t{});
  if (t == "uint" || t == "uint32") return get(std::uint32_t{});
  if (t == "float" || t == "float32") return get(float{});
  return get(double{});
}

}  // namespace

std::string encode_ply(const LabeledPointCloud& cloud, PlyFormat format) {
  cloud.validate();
  const bool normals = cloud.has_normals();
  std::string out = "ply\nformat ";
  out += format == PlyFormat::Ascii ? "ascii 1.0\n" : "binary_little_endian 1.0\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  if (normals) out += "property float nx\nproperty float ny\nproperty float nz\n";
  out += "property ushort label\nend_header\n";
  if (format == PlyFormat::Ascii) {
    char line[256];
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud.points[i];
      int n = std::snprintf(line, sizeof(line), "%.9g %.9g %.9g", static_cast<float>(p.x()), static_cast<float>(p.y()),
                            static_cast<float>(p.z()));
      out.append(line, n);
      if (normals) {
        const auto& q = cloud.normals[i];
        n = std::snprintf(line, sizeof(line), " %.9g %.9g %.9g", static_cast<float>(q.x()),
                          static_cast<float>(q.y()), static_cast<float>(q.z()));
        out.append(line, n);
      }
      out += ' ' + std::to_string(cloud.labels[i]) + '\n';
    }
  } else {
    out.reserve(out.size() + cloud.size() * (normals ? 26 : 14));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (int k = 0; k < 3; ++k) put(out, static_cast<float>(cloud.points[i][k]));
      if (normals)
        for (int k = 0; k < 3; ++k) put(out, static_cast<float>(cloud.normals[i][k]));
      put(out, static_cast<std::uint16_t>(cloud.labels[i]));
    }
  }
  return out;
}

LabeledPointCloud decode_ply(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw Error(ErrorKind::ParseError, "PLY: unterminated header");
    std::string line = bytes.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = nl + 1;
    return line;
  };
  if (next_line() != "ply") throw Error(ErrorKind::ParseError, "PLY: missing magic");

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
  };
  std::vector<Element> elements;
  bool binary = false;
  for (;;) {
    const std::string line = next_line();
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "end_header") break;
    if (key == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "binary_little_endian") binary = true;
      else if (fmt != "ascii") throw Error(ErrorKind::ParseError, "PLY: unsupported format '" + fmt + "'");
    } else if (key == "element") {
      Element e;
      ss >> e.name >> e.count;
      elements.push_back(e);
    } else if (key == "property") {
      if (elements.empty()) throw Error(ErrorKind::ParseError, "PLY: property before element");
      std::string type, name;
      ss >> type;
      if (type == "list") {
        if (elements.back().name == "vertex") throw Error(ErrorKind::ParseError, "PLY: list property on vertex");
        elements.back().props.push_back({"", "list"});
        continue;
      }
      ss >> name;
      elements.back().props.push_back({name, type});
    }
  }
  LabeledPointCloud cloud;
  for (const auto& e : elements) {
    if (e.name != "vertex") {
      if (e.count == 0) continue;
      throw Error(ErrorKind::ParseError, "PLY: only vertex elements are supported, found '" + e.name + "'");
    }
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < e.props.size(); ++i) column[e.props[i].name] = i;
    for (const char* req : {"x", "y", "z"})
      if (!column.count(req)) throw Error(ErrorKind::ParseError, std::string("PLY: missing property ") + req);
    const bool normals = column.count("nx") && column.count("ny") && column.count("nz");
    const bool labels = column.count("label") > 0;
    cloud.reserve(e.count, normals);
    std::vector<double> values(e.props.size());
    std::vector<std::size_t> offsets(e.props.size());
    std::size_t stride = 0;
    for (std::size_t i = 0; i < e.props.size(); ++i) {
      offsets[i] = stride;
      stride += type_size(e.props[i].type);
    }
    std::istringstream ascii;
    if (!binary) ascii.str(bytes.substr(pos));
    for (std::size_t v = 0; v < e.count; ++v) {
      if (binary) {
        if (pos + stride > bytes.size()) throw Error(ErrorKind::ParseError, "PLY: truncated vertex data");
        for (std::size_t i = 0; i < e.props.size(); ++i)
          values[i] = read_binary_value(bytes.data() + pos + offsets[i], e.props[i].type);
        pos += stride;
      } else {
        for (std::size_t i = 0; i < values.size(); ++i) {
          if (!(ascii >> values[i])) throw Error(ErrorKind::ParseError, "PLY: truncated vertex data");
          if (e.props[i].type == "float" || e.props[i].type == "float32")
            values[i] = static_cast<double>(static_cast<float>(values[i]));
        }
      }
      const Vec3 p(values[column["x"]], values[column["y"]], values[column["z"]]);
      const Label label = labels ? static_cast<Label>(values[column["label"]]) : kBackgroundLabel;
      if (normals) {
        Vec3 n(values[column["nx"]], values[column["ny"]], values[column["nz"]]);
        cloud.push_back(p, label, n.normalized());
      } else {
        cloud.push_back(p, label);
      }
    }
  }
  return cloud;
}

void write_ply(const std::filesystem::path& path, const LabeledPointCloud& cloud, PlyFormat format) {
  write_file_atomic(path, encode_ply(cloud, format));
}

LabeledPointCloud read_ply(const std::filesystem::path& path) { return decode_ply(read_file(path)); }

nlohmann::json pose_to_json(const Pose& pose) {
  const auto& q = pose.rotation();
  const auto& t = pose.translation();
  return {{"q", {q.w(), q.x(), q.y(), q.z()}}, {"t", {t.x(), t.y(), t.z()}}};
}

Pose pose_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("q") || !j.contains("t") || j["q"].size() != 4 || j["t"].size() != 3)
    throw Error(ErrorKind::ParseError, "pose must be {\"q\":[w,x,y,z],\"t\":[x,y,z]}");
  const auto& q = j["q"];
  const auto& t = j["t"];
  const Quat quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
  if (quat.norm() < 1e-12) throw Error(ErrorKind::ParseError, "pose quaternion has zero norm");
  return Pose(quat, Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>()));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorKind::IoFailure, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

void write_png16(const std::filesystem::path& path, const Image16& image) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height)
    throw Error(ErrorKind::InvalidArgument, "image buffer does not match its dimensions");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(tmp.c_str(), "wb"));
    if (!file) throw Error(ErrorKind::IoFailure, "cannot write " + tmp.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw Error(ErrorKind::IoFailure, "libpng failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, image.width, image.height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(2 * static_cast<std::size_t>(image.width));
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        const std::uint16_t v = image.pixels[static_cast<std::size_t>(y) * image.width + x];
        row[2 * x] = static_cast<png_byte>(v >> 8);  // PNG is big-endian
        row[2 * x + 1] = static_cast<png_byte>(v & 0xff);
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }
  std::filesystem::rename(tmp, path);
}

Image16 read_png16(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  Image16 image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::ParseError, "libpng failed reading " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  if (png_get_bit_depth(png, info) != 16 || png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::ParseError, path.string() + ": expected 16-bit grayscale PNG");
  }
  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height);
  std::vector<png_byte> row(2 * static_cast<std::size_t>(image.width));
  for (int y = 0; y < image.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < image.width; ++x)
      image.pixels[static_cast<std::size_t>(y) * image.width + x] =
          static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1]);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

}  // namespace semreg
