#include "dnmap/octree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace dnmap {

void OctreeConfig::validate() const {
  if (levels < 1 || levels > kMaxLevels) {
    throw std::invalid_argument("octree levels must be in [1, " + std::to_string(kMaxLevels) +
                                "], got " + std::to_string(levels));
  }
  if (!(leaf_voxel_size > 0.0) || !std::isfinite(leaf_voxel_size)) {
    throw std::invalid_argument("leaf_voxel_size must be positive");
  }
  if (!origin.allFinite()) throw std::invalid_argument("octree origin must be finite");
}

double OctreeConfig::voxel_size(int level) const {
  return leaf_voxel_size * static_cast<double>(1u << (levels - 1 - level));
}

bool Stencil::any_hit() const noexcept {
  for (int l = 0; l < levels; ++l) {
    if (level[l].hit) return true;
  }
  return false;
}

int Stencil::hit_count() const noexcept {
  int n = 0;
  for (int l = 0; l < levels; ++l) n += level[l].hit ? 1 : 0;
  return n;
}

SparseOctree::SparseOctree(OctreeConfig config) : config_(std::move(config)) {
  config_.validate();
  levels_.resize(static_cast<std::size_t>(config_.levels));
}

SparseOctree SparseOctree::build(std::span<const Vec3> points, const OctreeConfig& config) {
  if (points.empty()) throw EmptyMapError("cannot build an octree from an empty point set");
  SparseOctree tree(config);
  tree.extend(points);
  return tree;
}

SparseOctree SparseOctree::from_voxel_codes(const OctreeConfig& config,
                                            const std::vector<std::vector<std::uint64_t>>& codes) {
  SparseOctree tree(config);
  if (codes.size() != tree.levels_.size()) {
    throw std::invalid_argument("voxel code table has " + std::to_string(codes.size()) +
                                " levels, expected " + std::to_string(tree.levels_.size()));
  }
  for (int l = 0; l < tree.levels(); ++l) {
    auto sorted = codes[static_cast<std::size_t>(l)];
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (std::uint64_t code : sorted) {
      const auto c = morton_decode(code);
      if (c[0] + 1 >= kMortonAxisLimit || c[1] + 1 >= kMortonAxisLimit ||
          c[2] + 1 >= kMortonAxisLimit) {
        throw std::invalid_argument("voxel code outside the grid budget");
      }
    }
    tree.allocate(l, std::move(sorted));
  }
  for (int l = 1; l < tree.levels(); ++l) {
    for (std::uint64_t code : tree.voxel_codes(l)) {
      if (!tree.contains_voxel(l - 1, code >> 3)) {
        throw std::invalid_argument("voxel table violates parent closure at level " +
                                    std::to_string(l));
      }
    }
  }
  return tree;
}

std::int64_t SparseOctree::grid_bias(int level) const {
  // Centers the grid on the origin; halving per level keeps parent = child >> 1.
  return std::int64_t{1} << (kMortonAxisBits - 1 - static_cast<unsigned>(config_.levels - 1 - level));
}

bool SparseOctree::locate(int level, const Vec3& p, std::array<std::uint32_t, 3>& cell,
                          Vec3* frac) const {
  const double edge = config_.voxel_size(level);
  const std::int64_t bias = grid_bias(level);
  for (int a = 0; a < 3; ++a) {
    const double t = (p[a] - config_.origin[a]) / edge;
    if (!std::isfinite(t)) return false;
    const double f = std::floor(t);
    const double g = f + static_cast<double>(bias);
    // Corner coordinates reach g + 1, which must stay inside the budget.
    if (g < 0.0 || g >= static_cast<double>(kMortonAxisLimit - 1)) return false;
    cell[static_cast<std::size_t>(a)] = static_cast<std::uint32_t>(g);
    if (frac) (*frac)[a] = t - f;
  }
  return true;
}

std::optional<std::uint32_t> SparseOctree::find_corner(const Level& lvl, std::uint64_t code) const {
  auto it = std::lower_bound(lvl.corner_codes.begin(), lvl.corner_codes.end(), code);
  if (it == lvl.corner_codes.end() || *it != code) return std::nullopt;
  return lvl.corner_slots[static_cast<std::size_t>(it - lvl.corner_codes.begin())];
}

std::array<std::uint32_t, 8> SparseOctree::lookup_corners(const Level& lvl,
                                                          std::uint64_t voxel) const {
  const auto c = morton_decode(voxel);
  std::array<std::uint32_t, 8> slots{};
  for (std::uint32_t k = 0; k < 8; ++k) {
    const std::uint64_t code = morton_encode(c[0] + (k & 1u), c[1] + ((k >> 1) & 1u),
                                             c[2] + ((k >> 2) & 1u));
    slots[k] = *find_corner(lvl, code);
  }
  return slots;
}

void SparseOctree::rebuild_voxel_table() {
  for (auto& lvl : levels_) {
    lvl.voxel_corners.clear();
    lvl.voxel_corners.reserve(lvl.voxels.size());
    for (std::uint64_t v : lvl.voxels) lvl.voxel_corners.emplace(v, lookup_corners(lvl, v));
  }
}

void SparseOctree::allocate(int level, std::vector<std::uint64_t> new_voxels) {
  Level& lvl = levels_[static_cast<std::size_t>(level)];
  if (new_voxels.empty()) return;

  auto next_slot = static_cast<std::uint32_t>(lvl.corner_codes.size());
  std::unordered_map<std::uint64_t, std::uint32_t> fresh;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> added;
  for (std::uint64_t v : new_voxels) {
    const auto c = morton_decode(v);
    std::array<std::uint32_t, 8> slots{};
    for (std::uint32_t k = 0; k < 8; ++k) {
      const std::uint64_t code = morton_encode(c[0] + (k & 1u), c[1] + ((k >> 1) & 1u),
                                               c[2] + ((k >> 2) & 1u));
      if (auto existing = find_corner(lvl, code)) {
        slots[k] = *existing;
      } else if (auto it = fresh.find(code); it != fresh.end()) {
        slots[k] = it->second;
      } else {
        fresh.emplace(code, next_slot);
        added.emplace_back(code, next_slot);
        slots[k] = next_slot++;
      }
    }
    if (!finalized_) lvl.voxel_corners.emplace(v, slots);
  }

  std::sort(added.begin(), added.end());
  std::vector<std::uint64_t> codes;
  std::vector<std::uint32_t> slots;
  codes.reserve(lvl.corner_codes.size() + added.size());
  slots.reserve(codes.capacity());
  std::size_t i = 0, j = 0;
  while (i < lvl.corner_codes.size() || j < added.size()) {
    if (j == added.size() || (i < lvl.corner_codes.size() && lvl.corner_codes[i] < added[j].first)) {
      codes.push_back(lvl.corner_codes[i]);
      slots.push_back(lvl.corner_slots[i]);
      ++i;
    } else {
      codes.push_back(added[j].first);
      slots.push_back(added[j].second);
      ++j;
    }
  }
  lvl.corner_codes = std::move(codes);
  lvl.corner_slots = std::move(slots);

  std::vector<std::uint64_t> merged;
  merged.reserve(lvl.voxels.size() + new_voxels.size());
  std::merge(lvl.voxels.begin(), lvl.voxels.end(), new_voxels.begin(), new_voxels.end(),
             std::back_inserter(merged));
  lvl.voxels = std::move(merged);
}

std::size_t SparseOctree::extend(std::span<const Vec3> points) {
  for (const Vec3& p : points) {
    if (!p.allFinite()) throw std::invalid_argument("octree input contains a non-finite point");
  }
  if (points.empty()) return 0;
  if (finalized_) {
    finalized_ = false;
    rebuild_voxel_table();
  }

  std::size_t added = 0;
  std::array<std::uint32_t, 3> cell{};
  for (int l = 0; l < levels(); ++l) {
    std::vector<std::uint64_t> codes;
    codes.reserve(points.size());
    for (const Vec3& p : points) {
      if (!locate(l, p, cell, nullptr)) {
        throw std::out_of_range("point outside the octree grid budget");
      }
      codes.push_back(morton_encode(cell[0], cell[1], cell[2]));
    }
    std::sort(codes.begin(), codes.end());
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
    const auto& existing = levels_[static_cast<std::size_t>(l)].voxels;
    std::vector<std::uint64_t> fresh;
    std::set_difference(codes.begin(), codes.end(), existing.begin(), existing.end(),
                        std::back_inserter(fresh));
    added += fresh.size();
    allocate(l, std::move(fresh));
  }
  return added;
}

void SparseOctree::finalize() {
  for (auto& lvl : levels_) {
    std::unordered_map<std::uint64_t, std::array<std::uint32_t, 8>>().swap(lvl.voxel_corners);
  }
  finalized_ = true;
}

Stencil SparseOctree::query(const Vec3& x) const {
  Stencil st;
  st.levels = levels();
  std::array<std::uint32_t, 3> cell{};
  Vec3 frac;
  for (int l = 0; l < levels(); ++l) {
    LevelStencil& out = st.level[static_cast<std::size_t>(l)];
    if (!locate(l, x, cell, &frac)) continue;
    const Level& lvl = levels_[static_cast<std::size_t>(l)];
    const std::uint64_t code = morton_encode(cell[0], cell[1], cell[2]);
    if (!finalized_) {
      auto it = lvl.voxel_corners.find(code);
      if (it == lvl.voxel_corners.end()) continue;
      out.slots = it->second;
    } else {
      if (!std::binary_search(lvl.voxels.begin(), lvl.voxels.end(), code)) continue;
      out.slots = lookup_corners(lvl, code);
    }
    out.hit = true;
    for (std::uint32_t k = 0; k < 8; ++k) {
      const double wx = (k & 1u) ? frac[0] : 1.0 - frac[0];
      const double wy = ((k >> 1) & 1u) ? frac[1] : 1.0 - frac[1];
      const double wz = ((k >> 2) & 1u) ? frac[2] : 1.0 - frac[2];
      out.weights[k] = wx * wy * wz;
    }
  }
  return st;
}

bool SparseOctree::empty() const noexcept {
  return std::all_of(levels_.begin(), levels_.end(),
                     [](const Level& l) { return l.voxels.empty(); });
}

std::size_t SparseOctree::voxel_count(int level) const {
  return levels_.at(static_cast<std::size_t>(level)).voxels.size();
}

std::size_t SparseOctree::corner_count(int level) const {
  return levels_.at(static_cast<std::size_t>(level)).corner_codes.size();
}

std::size_t SparseOctree::total_voxel_count() const {
  return std::accumulate(levels_.begin(), levels_.end(), std::size_t{0},
                         [](std::size_t acc, const Level& l) { return acc + l.voxels.size(); });
}

std::size_t SparseOctree::total_corner_count() const {
  return std::accumulate(levels_.begin(), levels_.end(), std::size_t{0},
                         [](std::size_t acc, const Level& l) { return acc + l.corner_codes.size(); });
}

std::span<const std::uint64_t> SparseOctree::voxel_codes(int level) const {
  return levels_.at(static_cast<std::size_t>(level)).voxels;
}

std::vector<std::uint64_t> SparseOctree::corner_codes_in_slot_order(int level) const {
  const Level& lvl = levels_.at(static_cast<std::size_t>(level));
  std::vector<std::uint64_t> out(lvl.corner_codes.size());
  for (std::size_t i = 0; i < lvl.corner_codes.size(); ++i) out[lvl.corner_slots[i]] = lvl.corner_codes[i];
  return out;
}

std::optional<std::uint32_t> SparseOctree::corner_slot(int level, std::uint64_t corner_code) const {
  return find_corner(levels_.at(static_cast<std::size_t>(level)), corner_code);
}

bool SparseOctree::contains_voxel(int level, std::uint64_t code) const {
  const auto& v = levels_.at(static_cast<std::size_t>(level)).voxels;
  return std::binary_search(v.begin(), v.end(), code);
}

std::optional<std::uint64_t> SparseOctree::voxel_code_at(int level, const Vec3& x) const {
  std::array<std::uint32_t, 3> cell{};
  if (!locate(level, x, cell, nullptr)) return std::nullopt;
  return morton_encode(cell[0], cell[1], cell[2]);
}

Vec3 SparseOctree::voxel_min_corner(int level, std::uint64_t code) const {
  const auto c = morton_decode(code);
  const double edge = config_.voxel_size(level);
  const auto bias = static_cast<double>(grid_bias(level));
  return config_.origin + Vec3((c[0] - bias) * edge, (c[1] - bias) * edge, (c[2] - bias) * edge);
}

std::pair<Vec3, Vec3> SparseOctree::bounds() const {
  const auto codes = voxel_codes(0);
  if (codes.empty()) return {Vec3::Zero(), Vec3::Zero()};
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  const double edge = config_.voxel_size(0);
  for (std::uint64_t code : codes) {
    const Vec3 m = voxel_min_corner(0, code);
    lo = lo.cwiseMin(m);
    hi = hi.cwiseMax(m + Vec3::Constant(edge));
  }
  return {lo, hi};
}

bool same_structure(const SparseOctree& a, const SparseOctree& b) {
  if (a.levels() != b.levels()) return false;
  for (int l = 0; l < a.levels(); ++l) {
    const auto va = a.voxel_codes(l);
    const auto vb = b.voxel_codes(l);
    if (!std::equal(va.begin(), va.end(), vb.begin(), vb.end())) return false;
    if (a.corner_codes_in_slot_order(l) != b.corner_codes_in_slot_order(l)) return false;
  }
  return true;
}

}  // namespace dnmap
