#include "dnmap/storage.hpp"

#include <vector>

namespace dnmap {

StorageReport storage_report(FeatureMode mode, int dim, int bitwidth,
                             std::span<const std::size_t> corners_per_level,
                             std::size_t total_voxels, std::size_t decoder_params) {
  const std::uint64_t D = static_cast<std::uint64_t>(dim);
  const std::uint64_t B = static_cast<std::uint64_t>(bitwidth);
  std::uint64_t corners = 0;
  for (std::size_t n : corners_per_level) corners += n;
  const std::uint64_t level0 = corners_per_level.empty() ? 0 : corners_per_level[0];

  StorageReport r;
  r.decoder_bytes = 4 * static_cast<std::uint64_t>(decoder_params);
  r.spatial_bytes = 8 * static_cast<std::uint64_t>(total_voxels);
  switch (mode) {
    case FeatureMode::continuous:
      r.continuous_bytes = 4 * D * corners;
      break;
    case FeatureMode::indexing:
      r.indicator_bytes = packed_code_bytes(bitwidth) * corners;
      r.component_bytes = (std::uint64_t{1} << B) * D * 4;
      break;
    case FeatureMode::decomposition_naive:
      r.indicator_bytes = packed_code_bytes(bitwidth) * corners;
      r.component_bytes = (B + 1) * D * 4;
      break;
    case FeatureMode::decomposition_discrete_only:
    case FeatureMode::decomposition:
      r.indicator_bytes = packed_code_bytes(bitwidth) * corners;
      r.component_bytes = (2 * B + 1) * D * 4;
      if (mode == FeatureMode::decomposition) r.continuous_bytes = 4 * D * level0;
      break;
  }
  return r;
}

StorageReport storage_report(FeatureMode mode, int dim, int bitwidth, const SparseOctree& tree,
                             std::size_t decoder_params) {
  std::vector<std::size_t> corners;
  for (int l = 0; l < tree.levels(); ++l) corners.push_back(tree.corner_count(l));
  return storage_report(mode, dim, bitwidth, corners, tree.total_voxel_count(), decoder_params);
}

}  // namespace dnmap
