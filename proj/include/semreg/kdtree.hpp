#pragma once

#include "semreg/geometry.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace semreg {

/// Exact 3-D nearest-neighbour index. Equidistant neighbours resolve to the
/// lowest input index, so results match an exhaustive scan bit for bit.
class KdTree {
 public:
  struct Neighbor {
    std::size_t index = std::numeric_limits<std::size_t>::max();
    double squared_distance = std::numeric_limits<double>::infinity();
    bool valid() const { return index != std::numeric_limits<std::size_t>::max(); }
  };

  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points, std::size_t leaf_size = 12);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  Neighbor nearest(const Vec3& query) const;
  /// Nearest neighbour restricted to squared distance <= max_squared_distance.
  Neighbor nearest_within(const Vec3& query, double max_squared_distance) const;

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;   // leaf range into points_
    std::int32_t left = -1, right = -1;  // children, -1 for leaves
    int axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Vec3& q, Neighbor& best) const;

  std::vector<Vec3> points_;            // reordered
  std::vector<std::size_t> original_;   // reordered index -> input index
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 12;
};

/// Exhaustive scan with the same tie-break as KdTree; used as a reference.
KdTree::Neighbor brute_force_nearest(std::span<const Vec3> points, const Vec3& query);

}  // namespace semreg
