#pragma once

#include "dnmap/common.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace dnmap {

/// Feature representations stored at octree corners.
enum class FeatureMode {
  continuous,                   // D floats per corner at every level
  indexing,                     // softmax over 2^B codebook entries per corner
  decomposition_naive,          // B indicator bits, e = e_b + sum b_j de_j
  decomposition_discrete_only,  // B indicator bits, paired offsets
  decomposition,                // as above plus level-0 continuous features
};

/// basic: compose every corner embedding, then interpolate.
/// efficient: interpolate indicator (or index) vectors, then compose once.
enum class QueryPath { basic, efficient };

/// train: straight-through / softmax relaxations; infer: hard codes.
enum class Pass { train, infer };

std::string_view to_string(FeatureMode mode);
std::string_view to_string(QueryPath path);
/// Throws std::invalid_argument on an unknown name.
FeatureMode parse_feature_mode(std::string_view name);
QueryPath parse_query_path(std::string_view name);

bool uses_indicators(FeatureMode mode) noexcept;
bool uses_paired_offsets(FeatureMode mode) noexcept;

/// Read-only view over a component vector set in the flat layout
/// [bias (D) | offsets0 (B x D) | offsets1 (B x D)].
///
/// Read as the D x 2B weight matrix W, column j < B is offsets0 row j and
/// column B + j is offsets1 row j, so W b* + bias composes an embedding from
/// b* = (1 - b, b).
template <class T>
class ComponentView {
 public:
  ComponentView(std::span<const T> flat, int dim, int bitwidth);

  int dim() const noexcept { return dim_; }
  int bitwidth() const noexcept { return bitwidth_; }
  std::span<const T> bias() const { return flat_.subspan(0, static_cast<std::size_t>(dim_)); }
  std::span<const T> offset0(int j) const;
  std::span<const T> offset1(int j) const;
  /// Column k of W (k < 2B).
  std::span<const T> column(int k) const;

  /// e_b = bias + sum_j offsets0_j
  std::vector<T> composed_bias() const;
  /// de_j = offsets1_j - offsets0_j
  std::vector<T> offset_delta(int j) const;

 private:
  std::span<const T> flat_;
  int dim_;
  int bitwidth_;
};

/// Owning component vector set (shared bias plus paired offsets).
template <class T>
struct ComponentVectorSet {
  int dim = 0;
  int bitwidth = 0;
  std::vector<T> data;

  ComponentVectorSet(int dim, int bitwidth);
  static ComponentVectorSet random(int dim, int bitwidth, std::mt19937_64& rng, double scale);

  static std::size_t flat_size(int dim, int bitwidth) {
    return static_cast<std::size_t>(2 * bitwidth + 1) * static_cast<std::size_t>(dim);
  }
  ComponentView<T> view() const { return ComponentView<T>(data, dim, bitwidth); }
  std::span<T> bias();
  std::span<T> offset0(int j);
  std::span<T> offset1(int j);
};

/// e = bias + sum_j [(1 - b_j) offsets0_j + b_j offsets1_j] for b in {0,1}^B.
template <class T>
std::vector<T> compose(std::span<const T> bits, const ComponentView<T>& comps);

/// e = W b* + bias for a (possibly relaxed) b* of length 2B.
template <class T>
std::vector<T> compose_linear(std::span<const T> b_star, const ComponentView<T>& comps);

/// b* = concat(1 - b, b)
template <class T>
std::vector<T> expand_indicator(std::span<const T> bits);

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

/// Hard forward value and straight-through surrogate derivative.
template <class T>
struct BinarizeResult {
  std::vector<T> value;           // 1 if v > 0 else 0
  std::vector<T> surrogate_grad;  // sigma(v) (1 - sigma(v))
};

template <class T>
BinarizeResult<T> ste_binarize(std::span<const T> v);

/// Applies the straight-through rule: dL/dv = dL/db * sigma'(v).
template <class T>
std::vector<T> ste_backward(std::span<const T> v, std::span<const T> grad_b);

}  // namespace dnmap
