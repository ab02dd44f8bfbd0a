#include "dnmap/embedding.hpp"

#include <algorithm>
#include <string>

namespace dnmap {

std::string_view to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::continuous: return "continuous";
    case FeatureMode::indexing: return "indexing";
    case FeatureMode::decomposition_naive: return "decomposition_naive";
    case FeatureMode::decomposition_discrete_only: return "decomposition_discrete_only";
    case FeatureMode::decomposition: return "decomposition";
  }
  return "unknown";
}

std::string_view to_string(QueryPath path) {
  return path == QueryPath::basic ? "basic" : "efficient";
}

FeatureMode parse_feature_mode(std::string_view name) {
  for (auto m : {FeatureMode::continuous, FeatureMode::indexing, FeatureMode::decomposition_naive,
                 FeatureMode::decomposition_discrete_only, FeatureMode::decomposition}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown feature mode '" + std::string(name) + "'");
}

QueryPath parse_query_path(std::string_view name) {
  if (name == "basic") return QueryPath::basic;
  if (name == "efficient") return QueryPath::efficient;
  throw std::invalid_argument("unknown query path '" + std::string(name) + "'");
}

bool uses_indicators(FeatureMode mode) noexcept {
  return mode == FeatureMode::decomposition_naive ||
         mode == FeatureMode::decomposition_discrete_only || mode == FeatureMode::decomposition;
}

bool uses_paired_offsets(FeatureMode mode) noexcept {
  return mode == FeatureMode::decomposition_discrete_only || mode == FeatureMode::decomposition;
}

template <class T>
ComponentView<T>::ComponentView(std::span<const T> flat, int dim, int bitwidth)
    : flat_(flat), dim_(dim), bitwidth_(bitwidth) {
  if (dim <= 0 || bitwidth <= 0) throw ShapeError("component set needs positive D and B");
  if (flat.size() != ComponentVectorSet<T>::flat_size(dim, bitwidth)) {
    throw ShapeError("component set storage has " + std::to_string(flat.size()) +
                     " entries, expected (2B+1)D = " +
                     std::to_string(ComponentVectorSet<T>::flat_size(dim, bitwidth)));
  }
}

template <class T>
std::span<const T> ComponentView<T>::offset0(int j) const {
  return flat_.subspan(static_cast<std::size_t>((1 + j) * dim_), static_cast<std::size_t>(dim_));
}

template <class T>
std::span<const T> ComponentView<T>::offset1(int j) const {
  return flat_.subspan(static_cast<std::size_t>((1 + bitwidth_ + j) * dim_),
                       static_cast<std::size_t>(dim_));
}

template <class T>
std::span<const T> ComponentView<T>::column(int k) const {
  return flat_.subspan(static_cast<std::size_t>((1 + k) * dim_), static_cast<std::size_t>(dim_));
}

template <class T>
std::vector<T> ComponentView<T>::composed_bias() const {
  std::vector<T> out(bias().begin(), bias().end());
  for (int j = 0; j < bitwidth_; ++j) {
    const auto o = offset0(j);
    for (int d = 0; d < dim_; ++d) out[d] += o[d];
  }
  return out;
}

template <class T>
std::vector<T> ComponentView<T>::offset_delta(int j) const {
  std::vector<T> out(static_cast<std::size_t>(dim_));
  const auto o0 = offset0(j);
  const auto o1 = offset1(j);
  for (int d = 0; d < dim_; ++d) out[d] = o1[d] - o0[d];
  return out;
}

template <class T>
ComponentVectorSet<T>::ComponentVectorSet(int dim_, int bitwidth_)
    : dim(dim_), bitwidth(bitwidth_), data(flat_size(dim_, bitwidth_), T(0)) {}

template <class T>
ComponentVectorSet<T> ComponentVectorSet<T>::random(int dim, int bitwidth, std::mt19937_64& rng,
                                                    double scale) {
  ComponentVectorSet<T> set(dim, bitwidth);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& x : set.data) x = static_cast<T>(u(rng));
  return set;
}

template <class T>
std::span<T> ComponentVectorSet<T>::bias() {
  return std::span<T>(data).subspan(0, static_cast<std::size_t>(dim));
}

template <class T>
std::span<T> ComponentVectorSet<T>::offset0(int j) {
  return std::span<T>(data).subspan(static_cast<std::size_t>((1 + j) * dim),
                                    static_cast<std::size_t>(dim));
}

template <class T>
std::span<T> ComponentVectorSet<T>::offset1(int j) {
  return std::span<T>(data).subspan(static_cast<std::size_t>((1 + bitwidth + j) * dim),
                                    static_cast<std::size_t>(dim));
}

template <class T>
std::vector<T> compose(std::span<const T> bits, const ComponentView<T>& comps) {
  if (static_cast<int>(bits.size()) != comps.bitwidth()) {
    throw ShapeError("compose: indicator has " + std::to_string(bits.size()) +
                     " entries, component set has B = " + std::to_string(comps.bitwidth()));
  }
  std::vector<T> e(comps.bias().begin(), comps.bias().end());
  for (int j = 0; j < comps.bitwidth(); ++j) {
    const auto o = bits[static_cast<std::size_t>(j)] != T(0) ? comps.offset1(j) : comps.offset0(j);
    for (int d = 0; d < comps.dim(); ++d) e[d] += o[d];
  }
  return e;
}

template <class T>
std::vector<T> compose_linear(std::span<const T> b_star, const ComponentView<T>& comps) {
  if (static_cast<int>(b_star.size()) != 2 * comps.bitwidth()) {
    throw ShapeError("compose_linear: expanded indicator has " + std::to_string(b_star.size()) +
                     " entries, expected 2B = " + std::to_string(2 * comps.bitwidth()));
  }
  std::vector<T> e(comps.bias().begin(), comps.bias().end());
  for (int k = 0; k < 2 * comps.bitwidth(); ++k) {
    const T s = b_star[static_cast<std::size_t>(k)];
    const auto col = comps.column(k);
    for (int d = 0; d < comps.dim(); ++d) e[d] += s * col[d];
  }
  return e;
}

template <class T>
std::vector<T> expand_indicator(std::span<const T> bits) {
  const std::size_t b = bits.size();
  std::vector<T> out(2 * b);
  for (std::size_t j = 0; j < b; ++j) {
    out[j] = T(1) - bits[j];
    out[b + j] = bits[j];
  }
  return out;
}

template <class T>
BinarizeResult<T> ste_binarize(std::span<const T> v) {
  BinarizeResult<T> r;
  r.value.resize(v.size());
  r.surrogate_grad.resize(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    const T s = sigmoid(v[j]);
    r.value[j] = v[j] > T(0) ? T(1) : T(0);
    r.surrogate_grad[j] = s * (T(1) - s);
  }
  return r;
}

template <class T>
std::vector<T> ste_backward(std::span<const T> v, std::span<const T> grad_b) {
  if (v.size() != grad_b.size()) throw ShapeError("ste_backward: size mismatch");
  std::vector<T> out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    const T s = sigmoid(v[j]);
    out[j] = grad_b[j] * s * (T(1) - s);
  }
  return out;
}

#define DNMAP_INSTANTIATE(T)                                                              \
  template class ComponentView<T>;                                                        \
  template struct ComponentVectorSet<T>;                                                  \
  template std::vector<T> compose<T>(std::span<const T>, const ComponentView<T>&);        \
  template std::vector<T> compose_linear<T>(std::span<const T>, const ComponentView<T>&); \
  template std::vector<T> expand_indicator<T>(std::span<const T>);                        \
  template BinarizeResult<T> ste_binarize<T>(std::span<const T>);                         \
  template std::vector<T> ste_backward<T>(std::span<const T>, std::span<const T>);

DNMAP_INSTANTIATE(float)
DNMAP_INSTANTIATE(double)
#undef DNMAP_INSTANTIATE

}  // namespace dnmap
