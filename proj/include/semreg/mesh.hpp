#pragma once

#include "semreg/geometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

namespace semreg {

using Triangle = std::array<std::uint32_t, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;

  bool empty() const { return triangles.empty(); }
  /// Index range and non-degeneracy (area > 1e-12 m^2). Throws InvalidArgument.
  void validate() const;
  double triangle_area(std::size_t i) const;
  Vec3 triangle_normal(std::size_t i) const;  // unit, by winding
  /// Area-weighted surface centroid.
  Vec3 centroid() const;
  /// Largest vertex distance from `center`.
  double bounding_radius(const Vec3& center) const;
};

TriangleMesh transform(const TriangleMesh& mesh, const Pose& pose);
/// Concatenates meshes; vertex indices are offset accordingly.
TriangleMesh merge(std::span<const TriangleMesh> meshes);

TriangleMesh make_box(const Vec3& size, const Vec3& center = Vec3::Zero());
TriangleMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero());
/// Closed cylinder along +z, base at z = 0.
TriangleMesh make_cylinder(double radius, double height, int segments, const Vec3& base = Vec3::Zero());
/// Two-triangle rectangle in the z = 0 plane, centred at `center`.
TriangleMesh make_rectangle(double width, double depth, const Vec3& center = Vec3::Zero());

/// Triangulated OBJ; faces with more than three vertices are rejected.
TriangleMesh read_obj(const std::filesystem::path& path);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh read_stl(const std::filesystem::path& path);
void write_stl(const std::filesystem::path& path, const TriangleMesh& mesh);
/// Dispatches on extension (.obj / .stl).
TriangleMesh read_mesh(const std::filesystem::path& path);

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit
};

struct RayHit {
  double t = std::numeric_limits<double>::infinity();
  std::uint32_t triangle = std::numeric_limits<std::uint32_t>::max();
  bool valid() const { return triangle != std::numeric_limits<std::uint32_t>::max(); }
};

/// Moller-Trumbore test, |det| < 1e-9 counts as parallel. Returns t or +inf.
double intersect_triangle(const Ray& ray, const Vec3& v0, const Vec3& v1, const Vec3& v2);

/// Nearest positive-t hit over every triangle; ties resolve to the lowest index.
RayHit intersect_brute_force(const TriangleMesh& mesh, const Ray& ray);

/// Bounding volume hierarchy over a mesh. Hit results are identical to
/// intersect_brute_force, including the tie-break.
class Bvh {
 public:
  Bvh() = default;
  explicit Bvh(const TriangleMesh& mesh);

  RayHit intersect(const Ray& ray) const;
  const TriangleMesh& mesh() const { return mesh_; }

 private:
  struct Node {
    Eigen::Vector3d lo, hi;
    std::uint32_t begin = 0, count = 0;  // leaf triangle range into order_
    std::int32_t left = -1, right = -1;
  };
  std::int32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centers);

  TriangleMesh mesh_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);
/// Exhaustive unsigned distance from p to the mesh surface.
double point_mesh_distance(const TriangleMesh& mesh, const Vec3& p);

}  // namespace semreg
