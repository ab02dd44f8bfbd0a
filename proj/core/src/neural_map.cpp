#include "dnmap/neural_map.hpp"

#include <random>
#include <stdexcept>

namespace dnmap {

void MapConfig::validate() const {
  octree.validate();
  if (dim <= 0) throw std::invalid_argument("embedding dimension must be positive");
  if (bitwidth < 1 || bitwidth > 16) throw std::invalid_argument("bitwidth must be in [1, 16]");
  if (hidden <= 0) throw std::invalid_argument("decoder width must be positive");
}

namespace {

constexpr std::uint64_t kDecoderSeedSalt = 0x9e3779b97f4a7c15ULL;

SparseOctree checked(const MapConfig& config, SparseOctree tree) {
  config.validate();
  if (tree.levels() != config.octree.levels) {
    throw std::invalid_argument("octree height does not match the map configuration");
  }
  return tree;
}

}  // namespace

template <class T>
NeuralMap<T>::NeuralMap(const MapConfig& config, SparseOctree tree)
    : config_(config),
      tree_(checked(config, std::move(tree))),
      features_(config.mode, config.dim, config.bitwidth, tree_, config.seed),
      decoder_(config.dim, config.hidden) {
  std::mt19937_64 rng(config.seed ^ kDecoderSeedSalt);
  decoder_.init(rng);
}

template <class T>
std::size_t NeuralMap<T>::extend(std::span<const Vec3> points) {
  const std::size_t added = tree_.extend(points);
  if (added > 0) features_.grow(tree_);
  return added;
}

template <class T>
std::optional<T> NeuralMap<T>::sdf(const Vec3& x, Pass pass, QueryPath path) const {
  const Stencil st = tree_.query(x);
  if (!st.any_hit()) return std::nullopt;
  std::vector<T> z(static_cast<std::size_t>(config_.dim));
  return sdf(st, z, pass, path);
}

template <class T>
T NeuralMap<T>::sdf(const Stencil& stencil, std::span<T> z, Pass pass, QueryPath path,
                    OpCounter* ops) const {
  std::fill(z.begin(), z.end(), T(0));
  features_.query(stencil, z, pass, path, ops);
  return decoder_.forward(std::span<const T>(z.data(), z.size()));
}

template <class T>
std::vector<Parameter<T>*> NeuralMap<T>::parameters() {
  auto out = features_.parameters();
  out.push_back(&decoder_.params());
  return out;
}

template <class T>
std::vector<const Parameter<T>*> NeuralMap<T>::parameters() const {
  auto out = features_.parameters();
  out.push_back(&decoder_.params());
  return out;
}

template <class T>
void NeuralMap<T>::zero_grad() {
  features_.zero_grad();
  decoder_.params().zero_grad();
}

template <class T>
StorageReport NeuralMap<T>::storage() const {
  return storage_report(config_.mode, config_.dim, config_.bitwidth, tree_,
                        decoder_.parameter_count());
}

template class NeuralMap<float>;
template class NeuralMap<double>;

}  // namespace dnmap
