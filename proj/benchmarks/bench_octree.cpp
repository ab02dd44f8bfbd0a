#include "dnmap/morton.hpp"
#include "dnmap/octree.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace {

using namespace dnmap;

std::vector<Vec3> cloud(std::size_t n, double half, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

void BM_MortonEncode(benchmark::State& state) {
  std::uint32_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(morton_encode(i & 0xfffff, (i * 7) & 0xfffff, (i * 13) & 0xfffff));
    ++i;
  }
}
BENCHMARK(BM_MortonEncode);

void BM_OctreeBuild(benchmark::State& state) {
  const auto pts = cloud(static_cast<std::size_t>(state.range(0)), 10.0, 1);
  OctreeConfig oc;
  oc.leaf_voxel_size = 0.2;
  for (auto _ : state) {
    auto tree = SparseOctree::build(pts, oc);
    benchmark::DoNotOptimize(tree.total_corner_count());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_OctreeBuild)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_OctreeQuery(benchmark::State& state) {
  OctreeConfig oc;
  oc.leaf_voxel_size = 0.2;
  auto tree = SparseOctree::build(cloud(50000, 10.0, 2), oc);
  if (state.range(0)) tree.finalize();
  const auto probes = cloud(4096, 10.0, 3);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tree.query(probes[i++ & 4095]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_OctreeQuery)->ArgName("finalized")->Arg(0)->Arg(1);

}  // namespace
