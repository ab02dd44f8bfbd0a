#include "dnmap/loss.hpp"
#include "dnmap/neural_map.hpp"
#include "dnmap/optimizer.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace {

using namespace dnmap;

// One full optimization step (forward, Eikonal probes, backward, Adam) on a
// ground patch. range(0): FeatureMode, range(1): QueryPath.
void BM_TrainStep(benchmark::State& state) {
  const auto mode = static_cast<FeatureMode>(state.range(0));
  const auto path = static_cast<QueryPath>(state.range(1));
  MapConfig mc;
  mc.octree.leaf_voxel_size = 0.2;
  mc.octree.levels = 3;
  mc.mode = mode;
  mc.bitwidth = 8;
  std::vector<Vec3> ground;
  for (double x = -15; x < 15; x += 0.2) {
    for (double y = -15; y < 15; y += 0.2) ground.emplace_back(x + 0.1, y + 0.1, 0.1);
  }
  NeuralMap<float> map(mc, SparseOctree::build(ground, mc.octree));
  map.finalize();

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-14.9, 14.9), h(0.02, 0.18);
  std::vector<TrainingSample> batch(1024);
  for (auto& s : batch) {
    s.x = Vec3(u(rng), u(rng), h(rng));
    s.label = s.x.z() - 0.1;
  }
  Adam<float> adam(AdamConfig{});
  const LossConfig lc;
  LossWorkspace<float> ws;
  auto params = map.parameters();
  for (auto _ : state) {
    map.zero_grad();
    benchmark::DoNotOptimize(total_loss(map, std::span<const TrainingSample>(batch), lc, path, 1, true, &ws));
    adam.step(params);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(batch.size()));
  state.SetLabel(std::string(to_string(mode)) + "/" + std::string(to_string(path)));
}

void TrainArgs(benchmark::internal::Benchmark* b) {
  for (auto mode : {FeatureMode::continuous, FeatureMode::indexing, FeatureMode::decomposition}) {
    b->Args({static_cast<long>(mode), static_cast<long>(QueryPath::efficient)});
  }
  b->Args({static_cast<long>(FeatureMode::decomposition), static_cast<long>(QueryPath::basic)});
}
BENCHMARK(BM_TrainStep)->Apply(TrainArgs)->Unit(benchmark::kMillisecond);

}  // namespace
