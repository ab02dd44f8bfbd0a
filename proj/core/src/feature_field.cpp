#include "dnmap/feature_field.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dnmap {
namespace {

constexpr double kIndicatorInitScale = 0.01;
constexpr double kEmbeddingInitScale = 0.01;
constexpr int kMaxBitwidth = 16;

}  // namespace

template <class T>
FeatureField<T>::FeatureField(FeatureMode mode, int dim, int bitwidth, const SparseOctree& tree,
                              std::uint64_t seed)
    : mode_(mode), dim_(dim), bitwidth_(bitwidth), levels_(tree.levels()), rng_(seed) {
  if (dim <= 0) throw std::invalid_argument("feature dimension must be positive");
  if (bitwidth <= 0 || bitwidth > kMaxBitwidth) {
    throw std::invalid_argument("bitwidth must be in [1, " + std::to_string(kMaxBitwidth) + "]");
  }
  const auto L = static_cast<std::size_t>(levels_);
  const auto D = static_cast<std::size_t>(dim_);
  const auto B = static_cast<std::size_t>(bitwidth_);

  components_.name = "components";
  continuous_.name = "continuous";
  codebook_.name = "codebook";
  indicators_.resize(L);
  embeddings_.resize(L);
  logits_.resize(L);
  anchors_.resize(L);
  table_.resize(L);
  table_grad_.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    indicators_[l].name = "indicators[" + std::to_string(l) + "]";
    embeddings_[l].name = "embeddings[" + std::to_string(l) + "]";
    logits_[l].name = "logits[" + std::to_string(l) + "]";
  }

  if (uses_paired_offsets(mode_)) {
    init_rows(components_, 0, 2 * B + 1, D, kEmbeddingInitScale);
  } else if (mode_ == FeatureMode::decomposition_naive) {
    init_rows(components_, 0, B + 1, D, kEmbeddingInitScale);
  } else if (mode_ == FeatureMode::indexing) {
    init_rows(codebook_, 0, codebook_size(), D, kEmbeddingInitScale);
  }
  grow(tree);
}

template <class T>
void FeatureField<T>::init_rows(Parameter<T>& p, std::size_t old_rows, std::size_t rows,
                                std::size_t width, double scale) {
  p.resize(rows * width);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (std::size_t i = old_rows * width; i < rows * width; ++i) p.value[i] = static_cast<T>(u(rng_));
}

template <class T>
std::size_t FeatureField<T>::corner_count(int level) const {
  const auto l = static_cast<std::size_t>(level);
  switch (mode_) {
    case FeatureMode::continuous: return embeddings_.at(l).size() / static_cast<std::size_t>(dim_);
    case FeatureMode::indexing: return logits_.at(l).size() / codebook_size();
    default: return indicators_.at(l).size() / static_cast<std::size_t>(bitwidth_);
  }
}

template <class T>
void FeatureField<T>::grow(const SparseOctree& tree) {
  if (tree.levels() != levels_) throw ShapeError("octree height changed under a feature field");
  const auto D = static_cast<std::size_t>(dim_);
  const auto B = static_cast<std::size_t>(bitwidth_);
  for (int l = 0; l < levels_; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const std::size_t n = tree.corner_count(l);
    const std::size_t old = corner_count(l);
    if (n < old) throw ShapeError("octree lost corners under a feature field");
    if (n == old) continue;
    switch (mode_) {
      case FeatureMode::continuous:
        init_rows(embeddings_[li], old, n, D, kEmbeddingInitScale);
        break;
      case FeatureMode::indexing:
        init_rows(logits_[li], old, n, codebook_size(), kEmbeddingInitScale);
        break;
      default:
        init_rows(indicators_[li], old, n, B, kIndicatorInitScale);
        if (mode_ == FeatureMode::decomposition && l == 0) {
          init_rows(continuous_, old, n, D, kEmbeddingInitScale);
        }
        break;
    }
    if (frozen_) {
      anchors_[li].resize(n * B);
      for (std::size_t i = old * B; i < n * B; ++i) {
        const T v = indicators_[li].value[i];
        anchors_[li][i] = (v > T(0) ? T(1) : T(0)) - sigmoid(v);
      }
    }
  }
  table_valid_ = false;
}

template <class T>
std::vector<Parameter<T>*> FeatureField<T>::parameters() {
  std::vector<Parameter<T>*> out;
  switch (mode_) {
    case FeatureMode::continuous:
      for (auto& p : embeddings_) out.push_back(&p);
      break;
    case FeatureMode::indexing:
      out.push_back(&codebook_);
      for (auto& p : logits_) out.push_back(&p);
      break;
    default:
      out.push_back(&components_);
      for (auto& p : indicators_) out.push_back(&p);
      if (mode_ == FeatureMode::decomposition) out.push_back(&continuous_);
      break;
  }
  return out;
}

template <class T>
std::vector<const Parameter<T>*> FeatureField<T>::parameters() const {
  auto mut = const_cast<FeatureField<T>*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

template <class T>
void FeatureField<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
  for (auto& g : table_grad_) std::fill(g.begin(), g.end(), T(0));
}

template <class T>
ComponentView<T> FeatureField<T>::component_view() const {
  if (!uses_paired_offsets(mode_)) {
    throw std::logic_error("component_view: mode '" + std::string(to_string(mode_)) +
                           "' has no paired-offset component set");
  }
  return ComponentView<T>(components_.value, dim_, bitwidth_);
}

template <class T>
T FeatureField<T>::bit(int level, std::uint32_t slot, int j) const {
  const auto i = static_cast<std::size_t>(slot) * static_cast<std::size_t>(bitwidth_) +
                 static_cast<std::size_t>(j);
  const T v = indicators_[static_cast<std::size_t>(level)].value[i];
  if (frozen_) return anchors_[static_cast<std::size_t>(level)][i] + sigmoid(v);
  return v > T(0) ? T(1) : T(0);
}

template <class T>
void FeatureField<T>::corner_bits(int level, std::uint32_t slot, std::span<T> out) const {
  if (!uses_indicators(mode_)) throw std::logic_error("corner_bits: mode has no indicators");
  if (static_cast<int>(out.size()) != bitwidth_) throw ShapeError("corner_bits: output size");
  for (int j = 0; j < bitwidth_; ++j) out[static_cast<std::size_t>(j)] = bit(level, slot, j);
}

template <class T>
std::uint32_t FeatureField<T>::corner_index(int level, std::uint32_t slot) const {
  if (mode_ != FeatureMode::indexing) throw std::logic_error("corner_index: mode is not indexing");
  const std::size_t K = codebook_size();
  const T* row = logits_[static_cast<std::size_t>(level)].value.data() + slot * K;
  return static_cast<std::uint32_t>(std::max_element(row, row + K) - row);
}

template <class T>
void FeatureField<T>::softmax_row(int level, std::uint32_t slot, std::span<T> out) const {
  const std::size_t K = codebook_size();
  const T* row = logits_[static_cast<std::size_t>(level)].value.data() + slot * K;
  const T mx = *std::max_element(row, row + K);
  T sum = 0;
  for (std::size_t i = 0; i < K; ++i) {
    out[i] = std::exp(row[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < K; ++i) out[i] /= sum;
}

template <class T>
void FeatureField<T>::corner_embedding(int level, std::uint32_t slot, Pass pass,
                                       std::span<T> out) const {
  const auto D = static_cast<std::size_t>(dim_);
  if (out.size() != D) throw ShapeError("corner_embedding: output size");
  const auto B = bitwidth_;
  const T* comps = components_.value.data();
  switch (mode_) {
    case FeatureMode::continuous: {
      const T* row = embeddings_[static_cast<std::size_t>(level)].value.data() + slot * D;
      std::copy(row, row + D, out.begin());
      return;
    }
    case FeatureMode::indexing: {
      const T* cb = codebook_.value.data();
      if (pass == Pass::infer) {
        const T* row = cb + corner_index(level, slot) * D;
        std::copy(row, row + D, out.begin());
        return;
      }
      const std::size_t K = codebook_size();
      std::vector<T> p(K);
      softmax_row(level, slot, p);
      std::fill(out.begin(), out.end(), T(0));
      for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t d = 0; d < D; ++d) out[d] += p[i] * cb[i * D + d];
      }
      return;
    }
    case FeatureMode::decomposition_naive: {
      std::copy(comps, comps + D, out.begin());
      for (int j = 0; j < B; ++j) {
        const T b = bit(level, slot, j);
        const T* off = comps + (1 + static_cast<std::size_t>(j)) * D;
        for (std::size_t d = 0; d < D; ++d) out[d] += b * off[d];
      }
      return;
    }
    default: {
      std::copy(comps, comps + D, out.begin());
      for (int j = 0; j < B; ++j) {
        const T b = bit(level, slot, j);
        const T* off0 = comps + (1 + static_cast<std::size_t>(j)) * D;
        const T* off1 = comps + (1 + static_cast<std::size_t>(B + j)) * D;
        for (std::size_t d = 0; d < D; ++d) out[d] += (T(1) - b) * off0[d] + b * off1[d];
      }
      return;
    }
  }
}

template <class T>
std::uint64_t FeatureField<T>::param_stamp() const {
  std::uint64_t stamp = frozen_ ? 1 : 0;
  for (const auto* p : parameters()) stamp = stamp * 1000003u + p->version + p->size();
  return stamp;
}

template <class T>
void FeatureField<T>::prepare_basic(Pass pass, OpCounter* ops) {
  if (mode_ == FeatureMode::continuous) return;
  const auto D = static_cast<std::size_t>(dim_);
  for (int l = 0; l < levels_; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const std::size_t n = corner_count(l);
    table_[li].resize(n * D);
    table_grad_[li].assign(n * D, T(0));
    for (std::size_t s = 0; s < n; ++s) {
      corner_embedding(l, static_cast<std::uint32_t>(s), pass,
                       std::span<T>(table_[li].data() + s * D, D));
    }
    if (ops) {
      const std::uint64_t per_corner =
          mode_ == FeatureMode::indexing
              ? (pass == Pass::infer ? codebook_size() + D : 2 * codebook_size() + codebook_size() * D)
              : static_cast<std::uint64_t>(uses_paired_offsets(mode_) ? 2 * bitwidth_ : bitwidth_) * D;
      ops->compose_ops += per_corner * n;
    }
  }
  table_valid_ = true;
  table_pass_ = pass;
  table_stamp_ = param_stamp();
}

template <class T>
void FeatureField<T>::check_basic_ready(Pass pass) const {
  if (!table_valid_ || table_pass_ != pass || table_stamp_ != param_stamp()) {
    throw std::logic_error("basic-path corner table is stale; call prepare_basic first");
  }
}

template <class T>
void FeatureField<T>::query(const Stencil& st, std::span<T> z, Pass pass, QueryPath path,
                            OpCounter* ops) const {
  const auto D = static_cast<std::size_t>(dim_);
  if (z.size() != D) throw ShapeError("query: feature output has wrong dimension");
  const int B = bitwidth_;
  const auto Bs = static_cast<std::size_t>(B);
  const bool basic = path == QueryPath::basic && mode_ != FeatureMode::continuous;
  if (basic) check_basic_ready(pass);

  std::array<T, 2 * kMaxBitwidth> bstar{};
  std::vector<T> probs;
  std::vector<T> pint;

  for (int l = 0; l < st.levels && l < levels_; ++l) {
    const LevelStencil& ls = st.level[static_cast<std::size_t>(l)];
    if (!ls.hit) continue;
    const auto li = static_cast<std::size_t>(l);

    if (mode_ == FeatureMode::decomposition && l == 0) {
      const T* cont = continuous_.value.data();
      for (int c = 0; c < 8; ++c) {
        const T w = static_cast<T>(ls.weights[c]);
        const T* row = cont + ls.slots[c] * D;
        for (std::size_t d = 0; d < D; ++d) z[d] += w * row[d];
      }
    }

    if (mode_ == FeatureMode::continuous) {
      const T* emb = embeddings_[li].value.data();
      for (int c = 0; c < 8; ++c) {
        const T w = static_cast<T>(ls.weights[c]);
        const T* row = emb + ls.slots[c] * D;
        for (std::size_t d = 0; d < D; ++d) z[d] += w * row[d];
      }
      continue;
    }

    if (basic) {
      const T* tab = table_[li].data();
      for (int c = 0; c < 8; ++c) {
        const T w = static_cast<T>(ls.weights[c]);
        const T* row = tab + ls.slots[c] * D;
        for (std::size_t d = 0; d < D; ++d) z[d] += w * row[d];
      }
      continue;
    }

    const T* comps = components_.value.data();
    switch (mode_) {
      case FeatureMode::indexing: {
        const std::size_t K = codebook_size();
        const T* cb = codebook_.value.data();
        if (pass == Pass::infer) {
          for (int c = 0; c < 8; ++c) {
            const T w = static_cast<T>(ls.weights[c]);
            const T* row = cb + corner_index(l, ls.slots[c]) * D;
            for (std::size_t d = 0; d < D; ++d) z[d] += w * row[d];
          }
          if (ops) ops->compose_ops += 8 * (K + D);
          break;
        }
        probs.resize(K);
        pint.assign(K, T(0));
        for (int c = 0; c < 8; ++c) {
          const T w = static_cast<T>(ls.weights[c]);
          softmax_row(l, ls.slots[c], probs);
          for (std::size_t i = 0; i < K; ++i) pint[i] += w * probs[i];
        }
        for (std::size_t i = 0; i < K; ++i) {
          const T p = pint[i];
          const T* row = cb + i * D;
          for (std::size_t d = 0; d < D; ++d) z[d] += p * row[d];
        }
        if (ops) ops->compose_ops += 8 * 2 * K + K * D;
        break;
      }
      case FeatureMode::decomposition_naive: {
        std::fill(bstar.begin(), bstar.begin() + B, T(0));
        for (int c = 0; c < 8; ++c) {
          const T w = static_cast<T>(ls.weights[c]);
          for (int j = 0; j < B; ++j) bstar[static_cast<std::size_t>(j)] += w * bit(l, ls.slots[c], j);
        }
        for (std::size_t d = 0; d < D; ++d) z[d] += comps[d];
        for (std::size_t j = 0; j < Bs; ++j) {
          const T* off = comps + (1 + j) * D;
          for (std::size_t d = 0; d < D; ++d) z[d] += bstar[j] * off[d];
        }
        if (ops) ops->compose_ops += 8 * Bs + Bs * D;
        break;
      }
      default: {
        std::fill(bstar.begin(), bstar.begin() + 2 * B, T(0));
        for (int c = 0; c < 8; ++c) {
          const T w = static_cast<T>(ls.weights[c]);
          const T* vv = indicators_[li].value.data() + ls.slots[c] * Bs;
          const T* an = frozen_ ? anchors_[li].data() + ls.slots[c] * Bs : nullptr;
          for (std::size_t j = 0; j < Bs; ++j) {
            const T b = an ? an[j] + sigmoid(vv[j]) : (vv[j] > T(0) ? T(1) : T(0));
            bstar[j] += w * (T(1) - b);
            bstar[Bs + j] += w * b;
          }
        }
        for (std::size_t d = 0; d < D; ++d) z[d] += comps[d];
        for (std::size_t k = 0; k < 2 * Bs; ++k) {
          const T* col = comps + (1 + k) * D;
          for (std::size_t d = 0; d < D; ++d) z[d] += bstar[k] * col[d];
        }
        if (ops) ops->compose_ops += 8 * 2 * Bs + 2 * Bs * D;
        break;
      }
    }
  }
}

template <class T>
const T* FeatureField<T>::surrogate_slope(int level, std::uint32_t slot) {
  const auto li = static_cast<std::size_t>(level);
  const auto Bs = static_cast<std::size_t>(bitwidth_);
  if (slope_.size() != indicators_.size()) {
    slope_.resize(indicators_.size());
    slope_stamp_.resize(indicators_.size());
  }
  const Parameter<T>& ind = indicators_[li];
  const std::size_t n = ind.size() / Bs;
  if (slope_stamp_[li].size() != n) {
    slope_[li].assign(n * Bs, T(0));
    slope_stamp_[li].assign(n, 0);
  }
  T* out = slope_[li].data() + slot * Bs;
  const std::uint64_t want = ind.version + 1;
  if (slope_stamp_[li][slot] != want) {
    const T* vv = ind.value.data() + slot * Bs;
    for (std::size_t j = 0; j < Bs; ++j) {
      const T s = sigmoid(vv[j]);
      out[j] = s * (T(1) - s);
    }
    slope_stamp_[li][slot] = want;
  }
  return out;
}

template <class T>
void FeatureField<T>::backward(const Stencil& st, std::span<const T> g, QueryPath path) {
  const auto D = static_cast<std::size_t>(dim_);
  if (g.size() != D) throw ShapeError("backward: gradient has wrong dimension");
  const int B = bitwidth_;
  const auto Bs = static_cast<std::size_t>(B);
  const bool basic = path == QueryPath::basic && mode_ != FeatureMode::continuous;
  if (basic) check_basic_ready(Pass::train);

  std::array<T, 2 * kMaxBitwidth> bstar{};
  std::array<T, 2 * kMaxBitwidth> gstar{};
  std::vector<T> probs;
  std::vector<T> pint;
  std::vector<T> dpint;

  for (int l = 0; l < st.levels && l < levels_; ++l) {
    const LevelStencil& ls = st.level[static_cast<std::size_t>(l)];
    if (!ls.hit) continue;
    const auto li = static_cast<std::size_t>(l);

    if (mode_ == FeatureMode::decomposition && l == 0) {
      T* cg = continuous_.grad.data();
      for (int c = 0; c < 8; ++c) {
        const T w = static_cast<T>(ls.weights[c]);
        T* row = cg + ls.slots[c] * D;
        for (std::size_t d = 0; d < D; ++d) row[d] += w * g[d];
      }
    }

    if (mode_ == FeatureMode::continuous) {
      T* eg = embeddings_[li].grad.data();
      for (int c = 0; c < 8; ++c) {
        const T w = static_cast<T>(ls.weights[c]);
        T* row = eg + ls.slots[c] * D;
        for (std::size_t d = 0; d < D; ++d) row[d] += w * g[d];
      }
      continue;
    }

    if (basic) {
      T* tg = table_grad_[li].data();
      for (int c = 0; c < 8; ++c) {
        const T w = static_cast<T>(ls.weights[c]);
        T* row = tg + ls.slots[c] * D;
        for (std::size_t d = 0; d < D; ++d) row[d] += w * g[d];
      }
      continue;
    }

    const T* comps = components_.value.data();
    T* comps_grad = components_.grad.data();
    switch (mode_) {
      case FeatureMode::indexing: {
        const std::size_t K = codebook_size();
        const T* cb = codebook_.value.data();
        T* cbg = codebook_.grad.data();
        T* lg = logits_[li].grad.data();
        probs.resize(8 * K);
        pint.assign(K, T(0));
        for (int c = 0; c < 8; ++c) {
          const T w = static_cast<T>(ls.weights[c]);
          std::span<T> p(probs.data() + static_cast<std::size_t>(c) * K, K);
          softmax_row(l, ls.slots[c], p);
          for (std::size_t i = 0; i < K; ++i) pint[i] += w * p[i];
        }
        dpint.assign(K, T(0));
        for (std::size_t i = 0; i < K; ++i) {
          const T* row = cb + i * D;
          T* grow_ = cbg + i * D;
          T acc = 0;
          for (std::size_t d = 0; d < D; ++d) {
            grow_[d] += pint[i] * g[d];
            acc += row[d] * g[d];
          }
          dpint[i] = acc;
        }
        for (int c = 0; c < 8; ++c) {
          const T w = static_cast<T>(ls.weights[c]);
          const T* p = probs.data() + static_cast<std::size_t>(c) * K;
          T dot = 0;
          for (std::size_t i = 0; i < K; ++i) dot += p[i] * dpint[i];
          T* row = lg + ls.slots[c] * K;
          for (std::size_t i = 0; i < K; ++i) row[i] += w * p[i] * (dpint[i] - dot);
        }
        break;
      }
      case FeatureMode::decomposition_naive: {
        std::fill(bstar.begin(), bstar.begin() + B, T(0));
        for (int c = 0; c < 8; ++c) {
          const T w = static_cast<T>(ls.weights[c]);
          for (int j = 0; j < B; ++j) bstar[static_cast<std::size_t>(j)] += w * bit(l, ls.slots[c], j);
        }
        for (std::size_t d = 0; d < D; ++d) comps_grad[d] += g[d];
        for (std::size_t j = 0; j < Bs; ++j) {
          const T* off = comps + (1 + j) * D;
          T* offg = comps_grad + (1 + j) * D;
          T acc = 0;
          for (std::size_t d = 0; d < D; ++d) {
            offg[d] += bstar[j] * g[d];
            acc += off[d] * g[d];
          }
          gstar[j] = acc;
        }
        T* vg = indicators_[li].grad.data();
        for (int c = 0; c < 8; ++c) {
          const T w = static_cast<T>(ls.weights[c]);
          const std::size_t base = ls.slots[c] * Bs;
          const T* ds = surrogate_slope(l, ls.slots[c]);
          for (std::size_t j = 0; j < Bs; ++j) vg[base + j] += w * gstar[j] * ds[j];
        }
        break;
      }
      default: {
        std::fill(bstar.begin(), bstar.begin() + 2 * B, T(0));
        for (int c = 0; c < 8; ++c) {
          const T w = static_cast<T>(ls.weights[c]);
          const T* vv = indicators_[li].value.data() + ls.slots[c] * Bs;
          const T* an = frozen_ ? anchors_[li].data() + ls.slots[c] * Bs : nullptr;
          for (std::size_t j = 0; j < Bs; ++j) {
            const T b = an ? an[j] + sigmoid(vv[j]) : (vv[j] > T(0) ? T(1) : T(0));
            bstar[j] += w * (T(1) - b);
            bstar[Bs + j] += w * b;
          }
        }
        for (std::size_t d = 0; d < D; ++d) comps_grad[d] += g[d];
        for (std::size_t k = 0; k < 2 * Bs; ++k) {
          const T* col = comps + (1 + k) * D;
          T* colg = comps_grad + (1 + k) * D;
          T acc = 0;
          for (std::size_t d = 0; d < D; ++d) {
            colg[d] += bstar[k] * g[d];
            acc += col[d] * g[d];
          }
          gstar[k] = acc;
        }
        T* vg = indicators_[li].grad.data();
        for (int c = 0; c < 8; ++c) {
          const T w = static_cast<T>(ls.weights[c]);
          const std::size_t base = ls.slots[c] * Bs;
          const T* ds = surrogate_slope(l, ls.slots[c]);
          for (std::size_t j = 0; j < Bs; ++j) vg[base + j] += w * (gstar[Bs + j] - gstar[j]) * ds[j];
        }
        break;
      }
    }
  }
}

template <class T>
void FeatureField<T>::finish_backward(QueryPath path) {
  if (path != QueryPath::basic || mode_ == FeatureMode::continuous) return;
  const auto D = static_cast<std::size_t>(dim_);
  const auto Bs = static_cast<std::size_t>(bitwidth_);
  const T* comps = components_.value.data();
  T* comps_grad = components_.grad.data();
  std::vector<T> bits(Bs);
  std::vector<T> gstar(2 * Bs);
  std::vector<T> probs;
  std::vector<T> dp;

  for (int l = 0; l < levels_; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const std::size_t n = corner_count(l);
    std::vector<T>& tg = table_grad_[li];
    if (tg.size() != n * D) throw std::logic_error("finish_backward without prepare_basic");
    for (std::size_t s = 0; s < n; ++s) {
      const T* gt = tg.data() + s * D;
      const auto slot = static_cast<std::uint32_t>(s);
      if (mode_ == FeatureMode::indexing) {
        const std::size_t K = codebook_size();
        const T* cb = codebook_.value.data();
        T* cbg = codebook_.grad.data();
        probs.resize(K);
        dp.resize(K);
        softmax_row(l, slot, probs);
        T dot = 0;
        for (std::size_t i = 0; i < K; ++i) {
          T acc = 0;
          for (std::size_t d = 0; d < D; ++d) {
            cbg[i * D + d] += probs[i] * gt[d];
            acc += cb[i * D + d] * gt[d];
          }
          dp[i] = acc;
          dot += probs[i] * acc;
        }
        T* row = logits_[li].grad.data() + s * K;
        for (std::size_t i = 0; i < K; ++i) row[i] += probs[i] * (dp[i] - dot);
        continue;
      }

      for (std::size_t j = 0; j < Bs; ++j) bits[j] = bit(l, slot, static_cast<int>(j));
      for (std::size_t d = 0; d < D; ++d) comps_grad[d] += gt[d];
      const T* vv = indicators_[li].value.data() + s * Bs;
      T* vg = indicators_[li].grad.data() + s * Bs;
      if (mode_ == FeatureMode::decomposition_naive) {
        for (std::size_t j = 0; j < Bs; ++j) {
          const T* off = comps + (1 + j) * D;
          T* offg = comps_grad + (1 + j) * D;
          T acc = 0;
          for (std::size_t d = 0; d < D; ++d) {
            offg[d] += bits[j] * gt[d];
            acc += off[d] * gt[d];
          }
          const T sg = sigmoid(vv[j]);
          vg[j] += acc * sg * (T(1) - sg);
        }
        continue;
      }
      for (std::size_t k = 0; k < 2 * Bs; ++k) {
        const T b = k < Bs ? T(1) - bits[k] : bits[k - Bs];
        const T* col = comps + (1 + k) * D;
        T* colg = comps_grad + (1 + k) * D;
        T acc = 0;
        for (std::size_t d = 0; d < D; ++d) {
          colg[d] += b * gt[d];
          acc += col[d] * gt[d];
        }
        gstar[k] = acc;
      }
      for (std::size_t j = 0; j < Bs; ++j) {
        const T sg = sigmoid(vv[j]);
        vg[j] += (gstar[Bs + j] - gstar[j]) * sg * (T(1) - sg);
      }
    }
    std::fill(tg.begin(), tg.end(), T(0));
  }
}

template <class T>
void FeatureField<T>::freeze_straight_through() {
  if (!uses_indicators(mode_)) return;
  for (int l = 0; l < levels_; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const auto& v = indicators_[li].value;
    anchors_[li].resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) anchors_[li][i] = (v[i] > T(0) ? T(1) : T(0)) - sigmoid(v[i]);
  }
  frozen_ = true;
  table_valid_ = false;
}

template <class T>
void FeatureField<T>::release_straight_through() {
  for (auto& a : anchors_) std::vector<T>().swap(a);
  frozen_ = false;
  table_valid_ = false;
}

template class FeatureField<float>;
template class FeatureField<double>;

}  // namespace dnmap
