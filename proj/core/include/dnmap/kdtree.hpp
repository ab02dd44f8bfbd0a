#pragma once

#include "dnmap/common.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dnmap {

/// Static 3D kd-tree over a point set for exact nearest-neighbour queries.
class KdTree {
 public:
  struct Hit {
    std::uint32_t index = 0;  // into the input point array
    double squared_distance = 0;
  };

  explicit KdTree(std::span<const Vec3> points);

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  /// Throws std::logic_error on an empty tree.
  Hit nearest(const Vec3& q) const;

 private:
  void build(std::size_t lo, std::size_t hi, int depth);
  void search(std::size_t lo, std::size_t hi, const Vec3& q, Hit& best) const;

  // Balanced implicit layout: the median of [lo, hi) is the node, split on axes_[median].
  std::vector<Vec3> points_;
  std::vector<std::uint32_t> ids_;
  std::vector<std::uint8_t> axes_;
};

/// Reference O(n) scan with the same distance arithmetic as KdTree.
KdTree::Hit brute_force_nearest(std::span<const Vec3> points, const Vec3& q);

}  // namespace dnmap
