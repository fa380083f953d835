#include "semreg/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace semreg {

namespace {

inline bool better(double d2, std::size_t idx, const KdTree::Neighbor& best) {
  return d2 < best.squared_distance || (d2 == best.squared_distance && idx < best.index);
}

}  // namespace

KdTree::KdTree(std::span<const Vec3> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), original_(points.size()), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  std::iota(original_.begin(), original_.end(), std::size_t{0});
  if (points_.empty()) return;
  nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
  build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  Vec3 lo = points_[begin], hi = points_[begin];
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[i]);
    hi = hi.cwiseMax(points_[i]);
  }
  int axis;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as leaf

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::vector<std::uint32_t> order(end - begin);
  std::iota(order.begin(), order.end(), begin);
  std::nth_element(order.begin(), order.begin() + (mid - begin), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
                     return original_[a] < original_[b];
                   });
  std::vector<Vec3> pts(end - begin);
  std::vector<std::size_t> orig(end - begin);
  for (std::uint32_t i = 0; i < order.size(); ++i) {
    pts[i] = points_[order[i]];
    orig[i] = original_[order[i]];
  }
  std::copy(pts.begin(), pts.end(), points_.begin() + begin);
  std::copy(orig.begin(), orig.end(), original_.begin() + begin);

  const double split = points_[mid][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  return id;
}

void KdTree::search(std::int32_t node_id, const Vec3& q, Neighbor& best) const {
  const Node& node = nodes_[node_id];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const double d2 = (points_[i] - q).squaredNorm();
      if (better(d2, original_[i], best)) {
        best.squared_distance = d2;
        best.index = original_[i];
      }
    }
    return;
  }
  // Left holds coordinates <= split, right holds >= split.
  const double diff = q[node.axis] - node.split;
  const std::int32_t near = diff <= 0 ? node.left : node.right;
  const std::int32_t far = diff <= 0 ? node.right : node.left;
  search(near, q, best);
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

KdTree::Neighbor KdTree::nearest(const Vec3& query) const {
  Neighbor best;
  if (!nodes_.empty()) search(0, query, best);
  return best;
}

KdTree::Neighbor KdTree::nearest_within(const Vec3& query, double max_squared_distance) const {
  Neighbor best;
  if (nodes_.empty()) return best;
  // Seed the bound just above the limit so ties at the limit are still found.
  best.squared_distance = std::nextafter(max_squared_distance, std::numeric_limits<double>::infinity());
  search(0, query, best);
  if (!best.valid() || best.squared_distance > max_squared_distance) return Neighbor{};
  return best;
}

KdTree::Neighbor brute_force_nearest(std::span<const Vec3> points, const Vec3& query) {
  KdTree::Neighbor best;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d2 = (points[i] - query).squaredNorm();
    if (better(d2, i, best)) {
      best.squared_distance = d2;
      best.index = i;
    }
  }
  return best;
}

}  // namespace semreg
