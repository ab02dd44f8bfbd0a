#pragma once

#include "dnmap/decoder.hpp"
#include "dnmap/feature_field.hpp"
#include "dnmap/octree.hpp"
#include "dnmap/storage.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dnmap {

struct MapConfig {
  OctreeConfig octree;
  FeatureMode mode = FeatureMode::decomposition;
  int dim = 8;
  int bitwidth = 8;
  int hidden = 32;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on out-of-range sizes.
  void validate() const;
};

/// Octree + per-corner features + decoder: the full implicit map Phi.
/// Phi is a signed distance in meters.
template <class T>
class NeuralMap {
 public:
  NeuralMap(const MapConfig& config, SparseOctree tree);

  const MapConfig& config() const noexcept { return config_; }
  const SparseOctree& tree() const noexcept { return tree_; }
  FeatureField<T>& features() noexcept { return features_; }
  const FeatureField<T>& features() const noexcept { return features_; }
  Decoder<T>& decoder() noexcept { return decoder_; }
  const Decoder<T>& decoder() const noexcept { return decoder_; }

  /// Allocates voxels for new points and appends features for new corners.
  std::size_t extend(std::span<const Vec3> points);
  void finalize() { tree_.finalize(); }

  /// Phi(x), or nullopt when every level misses.
  std::optional<T> sdf(const Vec3& x, Pass pass = Pass::infer,
                       QueryPath path = QueryPath::efficient) const;
  /// Phi for a precomputed stencil; `z` is scratch of size dim().
  T sdf(const Stencil& stencil, std::span<T> z, Pass pass, QueryPath path,
        OpCounter* ops = nullptr) const;

  /// All trainable blocks: feature parameters, then the decoder.
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  void zero_grad();

  StorageReport storage() const;

 private:
  MapConfig config_;
  SparseOctree tree_;
  FeatureField<T> features_;
  Decoder<T> decoder_;
};

extern template class NeuralMap<float>;
extern template class NeuralMap<double>;

}  // namespace dnmap
