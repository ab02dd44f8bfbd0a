#include "dnmap/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dnmap {

KdTree::KdTree(std::span<const Vec3> points)
    : points_(points.begin(), points.end()), ids_(points.size()), axes_(points.size(), 0) {
  std::iota(ids_.begin(), ids_.end(), 0u);
  build(0, points_.size(), 0);
}

void KdTree::build(std::size_t lo, std::size_t hi, int depth) {
  if (hi - lo <= 1) return;
  Vec3 mn = points_[lo], mx = points_[lo];
  for (std::size_t i = lo + 1; i < hi; ++i) {
    mn = mn.cwiseMin(points_[i]);
    mx = mx.cwiseMax(points_[i]);
  }
  int axis = 0;
  (mx - mn).maxCoeff(&axis);
  const std::size_t mid = lo + (hi - lo) / 2;
  std::vector<std::uint32_t> order(hi - lo);
  std::iota(order.begin(), order.end(), 0u);
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(mid - lo), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[lo + a][axis] < points_[lo + b][axis];
                   });
  std::vector<Vec3> p(hi - lo);
  std::vector<std::uint32_t> id(hi - lo);
  for (std::size_t k = 0; k < order.size(); ++k) {
    p[k] = points_[lo + order[k]];
    id[k] = ids_[lo + order[k]];
  }
  std::copy(p.begin(), p.end(), points_.begin() + static_cast<std::ptrdiff_t>(lo));
  std::copy(id.begin(), id.end(), ids_.begin() + static_cast<std::ptrdiff_t>(lo));
  axes_[mid] = static_cast<std::uint8_t>(axis);
  build(lo, mid, depth + 1);
  build(mid + 1, hi, depth + 1);
}

void KdTree::search(std::size_t lo, std::size_t hi, const Vec3& q, Hit& best) const {
  if (lo >= hi) return;
  const std::size_t mid = lo + (hi - lo) / 2;
  const Vec3& p = points_[mid];
  const double d2 = (p - q).squaredNorm();
  if (d2 < best.squared_distance || (d2 == best.squared_distance && ids_[mid] < best.index)) {
    best = {ids_[mid], d2};
  }
  if (hi - lo == 1) return;
  const int axis = axes_[mid];
  const double diff = q[axis] - p[axis];
  const bool left_first = diff < 0;
  if (left_first) {
    search(lo, mid, q, best);
    if (diff * diff <= best.squared_distance) search(mid + 1, hi, q, best);
  } else {
    search(mid + 1, hi, q, best);
    if (diff * diff <= best.squared_distance) search(lo, mid, q, best);
  }
}

KdTree::Hit KdTree::nearest(const Vec3& q) const {
  if (points_.empty()) throw std::logic_error("nearest-neighbour query on an empty kd-tree");
  Hit best{std::numeric_limits<std::uint32_t>::max(), std::numeric_limits<double>::infinity()};
  search(0, points_.size(), q, best);
  return best;
}

KdTree::Hit brute_force_nearest(std::span<const Vec3> points, const Vec3& q) {
  if (points.empty()) throw std::logic_error("nearest-neighbour query on an empty point set");
  KdTree::Hit best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d2 = (points[i] - q).squaredNorm();
    if (d2 < best.squared_distance) best = {static_cast<std::uint32_t>(i), d2};
  }
  return best;
}

}  // namespace dnmap
