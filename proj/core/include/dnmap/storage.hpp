#pragma once

#include "dnmap/embedding.hpp"
#include "dnmap/octree.hpp"

#include <cstddef>
#include <cstdint>
#include <span>

namespace dnmap {

/// Byte accounting for a trained map. "Rep." is the feature storage:
/// indicators or indices, continuous embeddings and the shared component set
/// or codebook. "Total" adds the decoder and the 8-byte Morton code of every
/// voxel at every level.
struct StorageReport {
  std::uint64_t indicator_bytes = 0;   // packed bits or packed codebook indices
  std::uint64_t continuous_bytes = 0;  // per-corner float embeddings
  std::uint64_t component_bytes = 0;   // component set or codebook
  std::uint64_t decoder_bytes = 0;
  std::uint64_t spatial_bytes = 0;

  std::uint64_t rep_bytes() const noexcept {
    return indicator_bytes + continuous_bytes + component_bytes;
  }
  std::uint64_t total_bytes() const noexcept { return rep_bytes() + decoder_bytes + spatial_bytes; }
  double rep_kb() const noexcept { return static_cast<double>(rep_bytes()) / 1000.0; }
  double total_kb() const noexcept { return static_cast<double>(total_bytes()) / 1000.0; }
};

/// Bytes needed to store B indicator bits (or a B-bit index).
inline std::uint64_t packed_code_bytes(int bitwidth) {
  return static_cast<std::uint64_t>((bitwidth + 7) / 8);
}

/// `corners_per_level[l]` is the number of corner slots at level l.
StorageReport storage_report(FeatureMode mode, int dim, int bitwidth,
                             std::span<const std::size_t> corners_per_level,
                             std::size_t total_voxels, std::size_t decoder_params);

StorageReport storage_report(FeatureMode mode, int dim, int bitwidth, const SparseOctree& tree,
                             std::size_t decoder_params);

}  // namespace dnmap
