#include "dnmap/feature_field.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace {

using namespace dnmap;

const SparseOctree& shared_tree() {
  static const SparseOctree tree = [] {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::vector<Vec3> pts(50000);
    for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
    OctreeConfig oc;
    oc.leaf_voxel_size = 0.2;
    auto t = SparseOctree::build(pts, oc);
    t.finalize();
    return t;
  }();
  return tree;
}

std::vector<Stencil> stencils(std::size_t n) {
  const auto& tree = shared_tree();
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<Stencil> out;
  while (out.size() < n) {
    auto st = tree.query(Vec3(u(rng), u(rng), u(rng)));
    if (st.any_hit()) out.push_back(st);
  }
  return out;
}

// range(0): FeatureMode, range(1): Pass, range(2): bitwidth.
void BM_FeatureQuery(benchmark::State& state) {
  const auto mode = static_cast<FeatureMode>(state.range(0));
  const auto pass = static_cast<Pass>(state.range(1));
  FeatureField<float> field(mode, 8, static_cast<int>(state.range(2)), shared_tree(), 13);
  const auto queries = stencils(4096);
  std::vector<float> z(8);
  std::size_t i = 0;
  for (auto _ : state) {
    std::fill(z.begin(), z.end(), 0.0f);
    field.query(queries[i++ & 4095], z, pass, QueryPath::efficient);
    benchmark::DoNotOptimize(z.data());
  }
  state.SetItemsProcessed(state.iterations());
  state.SetLabel(std::string(to_string(mode)));
}

void FeatureArgs(benchmark::internal::Benchmark* b) {
  for (auto mode : {FeatureMode::continuous, FeatureMode::indexing, FeatureMode::decomposition_naive,
                    FeatureMode::decomposition_discrete_only, FeatureMode::decomposition}) {
    for (auto pass : {Pass::train, Pass::infer}) {
      b->Args({static_cast<long>(mode), static_cast<long>(pass), 4});
    }
  }
  b->Args({static_cast<long>(FeatureMode::decomposition), static_cast<long>(Pass::infer), 8});
  b->Args({static_cast<long>(FeatureMode::indexing), static_cast<long>(Pass::infer), 8});
}
BENCHMARK(BM_FeatureQuery)->Apply(FeatureArgs);

void BM_PrepareBasic(benchmark::State& state) {
  const auto mode = static_cast<FeatureMode>(state.range(0));
  FeatureField<float> field(mode, 8, 8, shared_tree(), 14);
  for (auto _ : state) {
    // Bumping a version invalidates the table so every iteration rebuilds it.
    for (auto* p : field.parameters()) ++p->version;
    field.prepare_basic(Pass::train);
  }
  state.SetLabel(std::string(to_string(mode)));
}
BENCHMARK(BM_PrepareBasic)
    ->Arg(static_cast<long>(FeatureMode::decomposition))
    ->Arg(static_cast<long>(FeatureMode::decomposition_naive))
    ->Unit(benchmark::kMillisecond);

}  // namespace
