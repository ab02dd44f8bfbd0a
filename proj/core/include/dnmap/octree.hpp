#pragma once

#include "dnmap/common.hpp"
#include "dnmap/morton.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dnmap {

/// Upper bound on octree height; stencils are fixed-size arrays of this length.
inline constexpr int kMaxLevels = 8;

struct OctreeConfig {
  int levels = 3;                 // level 0 is coarsest, levels-1 finest
  double leaf_voxel_size = 0.2;   // meters
  Vec3 origin = Vec3::Zero();     // world anchor of the voxel grid

  /// Throws std::invalid_argument on a non-positive size or unsupported height.
  void validate() const;
  double voxel_size(int level) const;
};

/// Trilinear interpolation data for one octree level.
struct LevelStencil {
  bool hit = false;
  std::array<std::uint32_t, 8> slots{};
  std::array<double, 8> weights{};
};

/// Per-level interpolation data for one query point. Corner c of a voxel sits
/// at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
struct Stencil {
  int levels = 0;
  std::array<LevelStencil, kMaxLevels> level{};

  bool any_hit() const noexcept;
  int hit_count() const noexcept;
};

/// Sparse multi-level voxel set keyed by Morton codes, with one feature slot
/// per unique voxel corner at each level.
///
/// Voxels are allocated wherever input points fall, at every level, so the
/// parent of any allocated voxel is allocated too. Corner slots are dense and
/// append-only: extending the tree never renumbers existing slots. While the
/// tree is being built a voxel -> corner-slot hash table accelerates lookups;
/// finalize() drops it and queries fall back to the sorted arrays.
class SparseOctree {
 public:
  explicit SparseOctree(OctreeConfig config = {});

  /// Throws EmptyMapError on an empty point set, std::out_of_range when a
  /// point lies outside the 21-bit grid budget.
  static SparseOctree build(std::span<const Vec3> points, const OctreeConfig& config);

  /// Rebuilds a tree from per-level sorted voxel codes with canonical slot
  /// order (sorted Morton, then corner offset).
  static SparseOctree from_voxel_codes(const OctreeConfig& config,
                                       const std::vector<std::vector<std::uint64_t>>& codes);

  /// Allocates voxels for new points. Returns the number of new voxels over
  /// all levels.
  std::size_t extend(std::span<const Vec3> points);

  void finalize();
  bool finalized() const noexcept { return finalized_; }

  /// Misses are reported per level; never throws.
  Stencil query(const Vec3& x) const;

  const OctreeConfig& config() const noexcept { return config_; }
  int levels() const noexcept { return config_.levels; }
  bool empty() const noexcept;

  std::size_t voxel_count(int level) const;
  std::size_t corner_count(int level) const;
  std::size_t total_voxel_count() const;
  std::size_t total_corner_count() const;

  std::span<const std::uint64_t> voxel_codes(int level) const;
  std::vector<std::uint64_t> corner_codes_in_slot_order(int level) const;
  std::optional<std::uint32_t> corner_slot(int level, std::uint64_t corner_code) const;
  bool contains_voxel(int level, std::uint64_t code) const;

  /// Morton code of the level voxel containing x, if x is inside the grid budget.
  std::optional<std::uint64_t> voxel_code_at(int level, const Vec3& x) const;
  /// World-space minimum corner of a voxel.
  Vec3 voxel_min_corner(int level, std::uint64_t code) const;
  /// Axis-aligned world bounds of the allocated level-0 voxels.
  std::pair<Vec3, Vec3> bounds() const;

 private:
  struct Level {
    std::vector<std::uint64_t> voxels;        // sorted
    std::vector<std::uint64_t> corner_codes;  // sorted
    std::vector<std::uint32_t> corner_slots;  // parallel to corner_codes
    std::unordered_map<std::uint64_t, std::array<std::uint32_t, 8>> voxel_corners;
  };

  std::int64_t grid_bias(int level) const;
  bool locate(int level, const Vec3& p, std::array<std::uint32_t, 3>& cell, Vec3* frac) const;
  std::optional<std::uint32_t> find_corner(const Level& lvl, std::uint64_t code) const;
  std::array<std::uint32_t, 8> lookup_corners(const Level& lvl, std::uint64_t voxel) const;
  void allocate(int level, std::vector<std::uint64_t> new_voxels);
  void rebuild_voxel_table();

  OctreeConfig config_;
  std::vector<Level> levels_;
  bool finalized_ = false;
};

/// True when both trees hold identical voxel sets and slot assignments.
bool same_structure(const SparseOctree& a, const SparseOctree& b);

}  // namespace dnmap
