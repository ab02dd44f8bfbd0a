#pragma once

#include "dnmap/embedding.hpp"
#include "dnmap/octree.hpp"
#include "dnmap/parameter.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace dnmap {

/// Counts scalar multiply-adds (and compares, for argmax) spent turning
/// stored corner codes into embeddings.
struct OpCounter {
  std::uint64_t compose_ops = 0;
};

/// Trainable per-corner features for every octree level, in one of the
/// FeatureMode representations, plus the shared component or codebook
/// parameters they index into.
///
/// The query feature for a point is the sum over hit levels of the trilinear
/// interpolation of its voxel's corner embeddings. In `decomposition` mode
/// the level-0 continuous features are added on top. Missed levels add
/// nothing.
///
/// Gradients accumulate into each Parameter's `grad`. On the basic path,
/// backward() only scatters into a dense per-corner embedding gradient;
/// finish_backward() then pushes it through the composition for every corner.
template <class T>
class FeatureField {
 public:
  FeatureField(FeatureMode mode, int dim, int bitwidth, const SparseOctree& tree,
               std::uint64_t seed);

  FeatureMode mode() const noexcept { return mode_; }
  int dim() const noexcept { return dim_; }
  int bitwidth() const noexcept { return bitwidth_; }
  int levels() const noexcept { return levels_; }
  /// 2^B for the indexing codebook.
  std::size_t codebook_size() const noexcept { return std::size_t{1} << bitwidth_; }
  std::size_t corner_count(int level) const;

  /// Appends freshly initialized rows for corners added to `tree` since the
  /// last call. Existing rows are untouched.
  void grow(const SparseOctree& tree);

  /// Every trainable block used by this mode, in a fixed order.
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  void zero_grad();

  Parameter<T>& components() { return components_; }
  const Parameter<T>& components() const { return components_; }
  Parameter<T>& indicators(int level) { return indicators_.at(static_cast<std::size_t>(level)); }
  const Parameter<T>& indicators(int level) const { return indicators_.at(static_cast<std::size_t>(level)); }
  Parameter<T>& continuous() { return continuous_; }
  const Parameter<T>& continuous() const { return continuous_; }
  Parameter<T>& embeddings(int level) { return embeddings_.at(static_cast<std::size_t>(level)); }
  const Parameter<T>& embeddings(int level) const { return embeddings_.at(static_cast<std::size_t>(level)); }
  Parameter<T>& codebook() { return codebook_; }
  const Parameter<T>& codebook() const { return codebook_; }
  Parameter<T>& logits(int level) { return logits_.at(static_cast<std::size_t>(level)); }
  const Parameter<T>& logits(int level) const { return logits_.at(static_cast<std::size_t>(level)); }

  /// Paired-offset component set; decomposition and decomposition_discrete_only only.
  ComponentView<T> component_view() const;

  /// Indicator values of one corner: hard bits, or the anchored relaxation
  /// while straight-through is frozen.
  void corner_bits(int level, std::uint32_t slot, std::span<T> out) const;
  /// argmax of a corner's logits (indexing).
  std::uint32_t corner_index(int level, std::uint32_t slot) const;
  /// Embedding a corner contributes before interpolation (discrete modes).
  void corner_embedding(int level, std::uint32_t slot, Pass pass, std::span<T> out) const;

  /// Materializes every corner embedding for the basic path.
  void prepare_basic(Pass pass, OpCounter* ops = nullptr);

  /// Adds the query feature for `stencil` into `z` (z must be zeroed by the caller).
  void query(const Stencil& stencil, std::span<T> z, Pass pass, QueryPath path,
             OpCounter* ops = nullptr) const;
  /// Accumulates dL/dparams for a training-pass query with upstream grad_z.
  void backward(const Stencil& stencil, std::span<const T> grad_z, QueryPath path);
  /// Completes a basic-path backward; no-op on the efficient path.
  void finish_backward(QueryPath path);

  /// Holds the straight-through offset sg[1(v>0) - sigma(v)] at its current
  /// value so that indicator values become differentiable functions of v.
  /// Used to validate the surrogate gradient by finite differences.
  void freeze_straight_through();
  void release_straight_through();
  bool straight_through_frozen() const noexcept { return frozen_; }

 private:
  T bit(int level, std::uint32_t slot, int j) const;
  std::uint64_t param_stamp() const;
  void init_rows(Parameter<T>& p, std::size_t old_rows, std::size_t rows, std::size_t width,
                 double scale);
  void softmax_row(int level, std::uint32_t slot, std::span<T> out) const;
  void check_basic_ready(Pass pass) const;
  const T* surrogate_slope(int level, std::uint32_t slot);

  FeatureMode mode_;
  int dim_;
  int bitwidth_;
  int levels_;
  std::mt19937_64 rng_;

  Parameter<T> components_;
  std::vector<Parameter<T>> indicators_;
  Parameter<T> continuous_;
  std::vector<Parameter<T>> embeddings_;
  Parameter<T> codebook_;
  std::vector<Parameter<T>> logits_;

  std::vector<std::vector<T>> anchors_;
  bool frozen_ = false;

  // sigma'(v) per indicator, filled lazily per slot; a slot is current when its
  // stamp equals the indicator block's version + 1.
  std::vector<std::vector<T>> slope_;
  std::vector<std::vector<std::uint64_t>> slope_stamp_;

  std::vector<std::vector<T>> table_;
  std::vector<std::vector<T>> table_grad_;
  bool table_valid_ = false;
  Pass table_pass_ = Pass::train;
  std::uint64_t table_stamp_ = 0;
};

extern template class FeatureField<float>;
extern template class FeatureField<double>;

}  // namespace dnmap
