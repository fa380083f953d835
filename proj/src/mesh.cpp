#include "semreg/mesh.hpp"

#include "semreg/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace semreg {

void TriangleMesh::validate() const {
  const auto n = vertices.size();
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    for (auto v : triangles[i])
      if (v >= n)
        throw Error(ErrorKind::InvalidArgument,
                    "triangle " + std::to_string(i) + " references vertex " + std::to_string(v) + " out of range");
    if (triangle_area(i) <= 1e-12)
      throw Error(ErrorKind::InvalidArgument, "triangle " + std::to_string(i) + " is degenerate");
  }
}

double TriangleMesh::triangle_area(std::size_t i) const {
  const auto& t = triangles[i];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

Vec3 TriangleMesh::triangle_normal(std::size_t i) const {
  const auto& t = triangles[i];
  return (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).normalized();
}

Vec3 TriangleMesh::centroid() const {
  Vec3 sum = Vec3::Zero();
  double area = 0.0;
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    const auto& t = triangles[i];
    const double a = triangle_area(i);
    sum += a * (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
    area += a;
  }
  return area > 0 ? Vec3(sum / area) : Vec3::Zero();
}

double TriangleMesh::bounding_radius(const Vec3& center) const {
  double r = 0.0;
  for (const auto& v : vertices) r = std::max(r, (v - center).norm());
  return r;
}

TriangleMesh transform(const TriangleMesh& mesh, const Pose& pose) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = pose.transform_point(v);
  return out;
}

TriangleMesh merge(std::span<const TriangleMesh> meshes) {
  TriangleMesh out;
  for (const auto& m : meshes) {
    const auto offset = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), m.vertices.begin(), m.vertices.end());
    for (const auto& t : m.triangles) out.triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
  }
  return out;
}

TriangleMesh make_box(const Vec3& size, const Vec3& center) {
  TriangleMesh m;
  const Vec3 h = 0.5 * size;
  for (int i = 0; i < 8; ++i)
    m.vertices.emplace_back(center + Vec3((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z()));
  // Outward winding.
  m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                 {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

TriangleMesh make_icosphere(double radius, int subdivisions, const Vec3& center) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                             {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
                             {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> cache;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = cache.find(key);
      if (it != cache.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const auto id = static_cast<std::uint32_t>(v.size() - 1);
      cache.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const auto a = midpoint(tri[0], tri[1]);
      const auto b = midpoint(tri[1], tri[2]);
      const auto c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  TriangleMesh m;
  m.vertices.reserve(v.size());
  for (const auto& p : v) m.vertices.emplace_back(center + radius * p);
  m.triangles = std::move(f);
  return m;
}

TriangleMesh make_cylinder(double radius, double height, int segments, const Vec3& base) {
  TriangleMesh m;
  const auto n = static_cast<std::uint32_t>(std::max(3, segments));
  for (std::uint32_t i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    m.vertices.emplace_back(base + Vec3(radius * std::cos(a), radius * std::sin(a), 0.0));
    m.vertices.emplace_back(base + Vec3(radius * std::cos(a), radius * std::sin(a), height));
  }
  const auto bottom = static_cast<std::uint32_t>(m.vertices.size());
  m.vertices.emplace_back(base);
  m.vertices.emplace_back(base + Vec3(0, 0, height));
  const std::uint32_t top = bottom + 1;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    const std::uint32_t b0 = 2 * i, t0 = 2 * i + 1, b1 = 2 * j, t1 = 2 * j + 1;
    m.triangles.push_back({b0, b1, t1});
    m.triangles.push_back({b0, t1, t0});
    m.triangles.push_back({bottom, b1, b0});
    m.triangles.push_back({top, t0, t1});
  }
  return m;
}

TriangleMesh make_rectangle(double width, double depth, const Vec3& center) {
  TriangleMesh m;
  const double hx = 0.5 * width, hy = 0.5 * depth;
  m.vertices = {center + Vec3(-hx, -hy, 0), center + Vec3(hx, -hy, 0), center + Vec3(hx, hy, 0),
                center + Vec3(-hx, hy, 0)};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

namespace {

std::uint32_t parse_obj_index(const std::string& token, std::size_t vertex_count, std::size_t line_no) {
  const auto slash = token.find('/');
  const std::string head = token.substr(0, slash);
  long idx = 0;
  try {
    idx = std::stol(head);
  } catch (const std::exception&) {
    throw Error(ErrorKind::ParseError, "OBJ line " + std::to_string(line_no) + ": bad face index '" + token + "'");
  }
  if (idx < 0) idx = static_cast<long>(vertex_count) + idx + 1;
  if (idx < 1 || static_cast<std::size_t>(idx) > vertex_count)
    throw Error(ErrorKind::ParseError, "OBJ line " + std::to_string(line_no) + ": face index out of range");
  return static_cast<std::uint32_t>(idx - 1);
}

}  // namespace

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  TriangleMesh m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x() >> v.y() >> v.z()))
        throw Error(ErrorKind::ParseError, "OBJ line " + std::to_string(line_no) + ": bad vertex");
      m.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<std::string> tokens;
      for (std::string tok; ss >> tok;) tokens.push_back(tok);
      if (tokens.size() != 3)
        throw Error(ErrorKind::ParseError, "OBJ line " + std::to_string(line_no) + ": face has " +
                                               std::to_string(tokens.size()) +
                                               " vertices; only triangulated meshes are supported");
      Triangle t;
      for (int k = 0; k < 3; ++k) t[k] = parse_obj_index(tokens[k], m.vertices.size(), line_no);
      m.triangles.push_back(t);
    }
  }
  if (m.triangles.empty()) throw Error(ErrorKind::ParseError, path.string() + ": no faces");
  m.validate();
  return m;
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  out.precision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

TriangleMesh read_stl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 84) throw Error(ErrorKind::ParseError, path.string() + ": truncated STL header");
  std::uint32_t count;
  std::memcpy(&count, data.data() + 80, 4);
  if (data.size() != 84 + 50ull * count)
    throw Error(ErrorKind::ParseError, path.string() + ": not a binary STL (size does not match facet count)");
  TriangleMesh m;
  std::map<std::array<float, 3>, std::uint32_t> index;
  for (std::uint32_t f = 0; f < count; ++f) {
    const char* rec = data.data() + 84 + 50ull * f;
    Triangle t;
    for (int k = 0; k < 3; ++k) {
      std::array<float, 3> xyz;
      std::memcpy(xyz.data(), rec + 12 + 12 * k, 12);
      auto [it, inserted] = index.emplace(xyz, static_cast<std::uint32_t>(m.vertices.size()));
      if (inserted) m.vertices.emplace_back(xyz[0], xyz[1], xyz[2]);
      t[k] = it->second;
    }
    m.triangles.push_back(t);
  }
  if (m.triangles.empty()) throw Error(ErrorKind::ParseError, path.string() + ": no facets");
  m.validate();
  return m;
}

void write_stl(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  char header[80] = {};
  out.write(header, 80);
  const auto count = static_cast<std::uint32_t>(mesh.triangles.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    float rec[12];
    const Vec3 n = mesh.triangle_normal(i);
    for (int k = 0; k < 3; ++k) rec[k] = static_cast<float>(n[k]);
    for (int v = 0; v < 3; ++v)
      for (int k = 0; k < 3; ++k) rec[3 + 3 * v + k] = static_cast<float>(mesh.vertices[mesh.triangles[i][v]][k]);
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    const std::uint16_t attr = 0;
    out.write(reinterpret_cast<const char*>(&attr), 2);
  }
}

TriangleMesh read_mesh(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".obj") return read_obj(path);
  if (ext == ".stl") return read_stl(path);
  throw Error(ErrorKind::ParseError, "unsupported mesh format '" + ext + "' (expected .obj or .stl)");
}

double intersect_triangle(const Ray& ray, const Vec3& v0, const Vec3& v1, const Vec3& v2) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const Vec3 e1 = v1 - v0;
  const Vec3 e2 = v2 - v0;
  const Vec3 p = ray.direction.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-9) return kInf;
  const double inv = 1.0 / det;
  const Vec3 s = ray.origin - v0;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return kInf;
  const Vec3 q = s.cross(e1);
  const double v = ray.direction.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return kInf;
  const double t = e2.dot(q) * inv;
  return t > 0.0 ? t : kInf;
}

RayHit intersect_brute_force(const TriangleMesh& mesh, const Ray& ray) {
  RayHit best;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& tri = mesh.triangles[i];
    const double t = intersect_triangle(ray, mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    if (t < best.t) {
      best.t = t;
      best.triangle = static_cast<std::uint32_t>(i);
    }
  }
  return best;
}

Bvh::Bvh(const TriangleMesh& mesh) : mesh_(mesh) {
  const auto n = static_cast<std::uint32_t>(mesh_.triangles.size());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0u);
  std::vector<Vec3> centers(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto& t = mesh_.triangles[i];
    centers[i] = (mesh_.vertices[t[0]] + mesh_.vertices[t[1]] + mesh_.vertices[t[2]]) / 3.0;
  }
  if (n > 0) build(0, n, centers);
}

std::int32_t Bvh::build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centers) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  Vec3 clo = lo, chi = hi;
  for (std::uint32_t i = begin; i < end; ++i) {
    for (auto v : mesh_.triangles[order_[i]]) {
      lo = lo.cwiseMin(mesh_.vertices[v]);
      hi = hi.cwiseMax(mesh_.vertices[v]);
    }
    clo = clo.cwiseMin(centers[order_[i]]);
    chi = chi.cwiseMax(centers[order_[i]]);
  }
  // Pad so that rounding in the slab test can never reject a box the exact test would enter.
  const Vec3 pad = Vec3::Constant(1e-9 + 1e-7 * (hi - lo).maxCoeff());
  nodes_[id].lo = lo - pad;
  nodes_[id].hi = hi + pad;
  if (end - begin <= 4) {
    nodes_[id].begin = begin;
    nodes_[id].count = end - begin;
    return id;
  }
  int axis;
  (chi - clo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (centers[a][axis] != centers[b][axis]) return centers[a][axis] < centers[b][axis];
                     return a < b;
                   });
  const std::int32_t left = build(begin, mid, centers);
  const std::int32_t right = build(mid, end, centers);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

namespace {

inline double slab_entry(const Vec3& lo, const Vec3& hi, const Vec3& origin, const Vec3& inv_dir, double t_max) {
  double t0 = 0.0, t1 = t_max;
  for (int k = 0; k < 3; ++k) {
    double a = (lo[k] - origin[k]) * inv_dir[k];
    double b = (hi[k] - origin[k]) * inv_dir[k];
    if (std::isnan(a) || std::isnan(b)) {
      // Direction component is zero and origin lies on a slab plane.
      if (origin[k] < lo[k] || origin[k] > hi[k]) return std::numeric_limits<double>::infinity();
      continue;
    }
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return std::numeric_limits<double>::infinity();
  }
  return t0;
}

}  // namespace

RayHit Bvh::intersect(const Ray& ray) const {
  RayHit best;
  if (nodes_.empty()) return best;
  const Vec3 inv_dir = ray.direction.cwiseInverse();
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    // <= keeps equal-t hits reachable for the index tie-break.
    const double entry = slab_entry(node.lo, node.hi, ray.origin, inv_dir, best.t);
    if (entry == std::numeric_limits<double>::infinity() || entry > best.t) continue;
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.begin + node.count; ++i) {
        const std::uint32_t tri_id = order_[i];
        const auto& tri = mesh_.triangles[tri_id];
        const double t = intersect_triangle(ray, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]], mesh_.vertices[tri[2]]);
        if (t < best.t || (t == best.t && t < std::numeric_limits<double>::infinity() && tri_id < best.triangle)) {
          best.t = t;
          best.triangle = tri_id;
        }
      }
      continue;
    }
    stack[top++] = node.right;
    stack[top++] = node.left;
  }
  return best;
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Closest point on triangle (Ericson, Real-Time Collision Detection 5.1.5).
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return (p - a).norm();
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return (p - b).norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + d1 / (d1 - d3) * ab)).norm();
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return (p - c).norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + d2 / (d2 - d6) * ac)).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return (p - (b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b))).norm();
  const double denom = 1.0 / (va + vb + vc);
  return (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm();
}

double point_mesh_distance(const TriangleMesh& mesh, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : mesh.triangles)
    best = std::min(best, point_triangle_distance(p, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]));
  return best;
}

}  // namespace semreg
