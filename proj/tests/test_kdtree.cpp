#include "doctest.h"
#include "test_support.hpp"

#include "semreg/kdtree.hpp"

using namespace semreg;

TEST_CASE("kd-tree nearest neighbour equals exhaustive scan") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t n : {1u, 2u, 13u, 500u, 2000u}) {
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
    const KdTree tree(pts);
    for (int q = 0; q < 300; ++q) {
      const Vec3 query(u(rng) * 1.5, u(rng) * 1.5, u(rng) * 1.5);
      const auto a = tree.nearest(query);
      const auto b = brute_force_nearest(pts, query);
      REQUIRE(a.index == b.index);
      REQUIRE(a.squared_distance == b.squared_distance);
    }
  }
}

TEST_CASE("kd-tree ties resolve to the lowest index") {
  // Grid with many duplicates and equidistant neighbours.
  std::vector<Vec3> pts;
  for (int rep = 0; rep < 3; ++rep)
    for (int x = 0; x < 6; ++x)
      for (int y = 0; y < 6; ++y) pts.emplace_back(x, y, 0);
  const KdTree tree(pts, 2);
  for (int x = 0; x < 6; ++x)
    for (int y = 0; y < 6; ++y) {
      const Vec3 q(x + 0.5, y + 0.5, 0.0);  // four equidistant grid points
      CHECK(tree.nearest(q).index == brute_force_nearest(pts, q).index);
      CHECK(tree.nearest(Vec3(x, y, 0)).index == static_cast<std::size_t>(x * 6 + y));
    }
}

TEST_CASE("kd-tree radius-limited query") {
  std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const KdTree tree(pts);
  CHECK_FALSE(tree.nearest_within(Vec3(0.5, 0.5, 0), 0.25).valid());
  const auto hit = tree.nearest_within(Vec3(0.9, 0, 0), 0.25);
  REQUIRE(hit.valid());
  CHECK(hit.index == 1);
  CHECK(tree.nearest_within(Vec3(0.5, 0, 0), 0.25).index == 0);  // boundary, tie
  CHECK_FALSE(KdTree().nearest(Vec3::Zero()).valid());
}
