#include "dnmap/trainer.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

namespace {

using namespace dnmap;

MapConfig small_config(FeatureMode mode) {
  MapConfig mc;
  mc.octree.levels = 2;
  mc.octree.leaf_voxel_size = 1.0;
  mc.mode = mode;
  mc.dim = 4;
  mc.bitwidth = 2;
  mc.hidden = 8;
  mc.seed = 1;
  return mc;
}

TrainConfig quick_train(std::int64_t iterations, std::size_t batch) {
  TrainConfig tc;
  tc.iterations = iterations;
  tc.batch_size = batch;
  tc.threads = 1;
  tc.seed = 5;
  return tc;
}

// Only the selected offset of each bit enters the forward pass, so only it
// moves after the first step; the unselected one has zero gradient and zero
// Adam moments.
TEST(Trainer, SelectedOffsetsUpdateRegardlessOfBitValue) {
  NeuralMap<double> map(small_config(FeatureMode::decomposition_discrete_only), testutil::two_voxel_tree());
  testutil::randomize(map, 2);
  for (int l = 0; l < 2; ++l) {
    auto& v = map.features().indicators(l).value;
    for (std::size_t s = 0; s < v.size() / 2; ++s) {
      v[2 * s] = -0.5;     // b_0 = 0
      v[2 * s + 1] = 0.5;  // b_1 = 1
    }
  }
  const auto before = map.features().components().value;
  const auto before_v = map.features().indicators(1).value;
  const auto batch = testutil::two_voxel_batch(64, 3);
  const auto result = train_batch(map, std::span<const TrainingSample>(batch), quick_train(1, 64));
  ASSERT_EQ(result.trace.size(), 1u);

  const auto& after = map.features().components().value;
  const int D = 4;
  auto changed = [&](int block) {
    for (int d = 0; d < D; ++d) {
      if (after[block * D + d] != before[block * D + d]) return true;
    }
    return false;
  };
  // Blocks: bias, offset0_0, offset0_1, offset1_0, offset1_1.
  EXPECT_TRUE(changed(0));
  EXPECT_TRUE(changed(1));   // offset0 of bit 0 (b_0 = 0)
  EXPECT_FALSE(changed(2));  // offset0 of bit 1 (b_1 = 1)
  EXPECT_FALSE(changed(3));  // offset1 of bit 0
  EXPECT_TRUE(changed(4));   // offset1 of bit 1

  // Straight-through: indicator values move even though the bits are hard.
  EXPECT_NE(map.features().indicators(1).value, before_v);
}

TEST(Trainer, IndicatorsReceiveStraightThroughGradient) {
  for (auto mode : {FeatureMode::decomposition, FeatureMode::decomposition_naive}) {
    NeuralMap<double> map(small_config(mode), testutil::two_voxel_tree());
    testutil::randomize(map, 4);
    const auto batch = testutil::two_voxel_batch(32, 5);
    map.zero_grad();
    total_loss(map, std::span<const TrainingSample>(batch), LossConfig{}, QueryPath::efficient, 1);
    const auto& g = map.features().indicators(1).grad;
    EXPECT_GT(std::count_if(g.begin(), g.end(), [](double x) { return x != 0.0; }), 0);
    for (double x : g) EXPECT_TRUE(std::isfinite(x));
  }
}

TEST(Trainer, SeededRunsReproduceLossTrace) {
  const auto scans = testutil::sphere_scans(3, 12);
  const auto samples = sample_scans(scans, SamplingConfig{}, 1);
  auto run = [&](int threads) {
    MapConfig mc;
    mc.bitwidth = 4;
    mc.seed = 2;
    NeuralMap<float> map(mc, build_octree(scans, mc.octree));
    auto tc = quick_train(30, 256);
    tc.threads = threads;
    return train_batch(map, std::span<const TrainingSample>(samples), tc).trace;
  };
  const auto a = run(1), b = run(1);
  ASSERT_EQ(a.size(), 30u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].sdf, b[i].sdf);
    EXPECT_EQ(a[i].eikonal, b[i].eikonal);
  }
}

TEST(Trainer, BatchModeLeavesOctreeUntouched) {
  const auto scans = testutil::sphere_scans(2, 10);
  const auto samples = sample_scans(scans, SamplingConfig{}, 1);
  MapConfig mc;
  mc.bitwidth = 4;
  NeuralMap<float> map(mc, build_octree(scans, mc.octree));
  const SparseOctree before = map.tree();
  train_batch(map, std::span<const TrainingSample>(samples), quick_train(5, 128));
  EXPECT_TRUE(same_structure(before, map.tree()));
}

TEST(Trainer, EmptyInputsThrow) {
  MapConfig mc = small_config(FeatureMode::decomposition);
  NeuralMap<float> map(mc, testutil::two_voxel_tree());
  EXPECT_THROW(train_batch(map, std::span<const TrainingSample>(), quick_train(1, 8)), InputError);
  SamplingConfig sc;
  EXPECT_THROW(train_incremental(map, std::span<const PosedScan>(), sc, quick_train(1, 8)), InputError);
  auto bad = quick_train(1, 8);
  bad.batch_size = 0;
  const auto batch = testutil::two_voxel_batch(4, 1);
  EXPECT_THROW(train_batch(map, std::span<const TrainingSample>(batch), bad), std::invalid_argument);
}

TEST(Trainer, HookCadence) {
  MapConfig mc = small_config(FeatureMode::decomposition);
  NeuralMap<float> map(mc, testutil::two_voxel_tree());
  const auto batch = testutil::two_voxel_batch(16, 1);
  std::vector<std::int64_t> calls;
  train_batch(map, std::span<const TrainingSample>(batch), quick_train(10, 8),
              [&](std::int64_t done) { calls.push_back(done); }, 4);
  EXPECT_EQ(calls, (std::vector<std::int64_t>{4, 8}));
}

TEST(Trainer, IncrementalGrowsMapAndUsesReplay) {
  const auto scans = testutil::sphere_scans(3, 12);
  MapConfig mc;
  mc.bitwidth = 4;
  NeuralMap<float> map(mc, SparseOctree(mc.octree));
  auto tc = quick_train(0, 128);
  tc.iterations_per_scan = 5;
  std::vector<std::int64_t> calls;
  const auto result = train_incremental(map, std::span<const PosedScan>(scans), SamplingConfig{}, tc,
                                        [&](std::int64_t done) { calls.push_back(done); }, 5);
  EXPECT_EQ(result.trace.size(), 15u);
  EXPECT_EQ(calls, (std::vector<std::int64_t>{5, 10, 15}));
  // Same voxels and corners as a batch build; only the append-only slot order differs.
  const auto batch_tree = build_octree(scans, mc.octree);
  for (int l = 0; l < map.tree().levels(); ++l) {
    const auto a = map.tree().voxel_codes(l);
    const auto b = batch_tree.voxel_codes(l);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end())) << "level " << l;
    auto ca = map.tree().corner_codes_in_slot_order(l);
    auto cb = batch_tree.corner_codes_in_slot_order(l);
    std::sort(ca.begin(), ca.end());
    std::sort(cb.begin(), cb.end());
    EXPECT_EQ(ca, cb) << "level " << l;
  }
  for (int l = 0; l < map.tree().levels(); ++l) {
    EXPECT_EQ(map.features().corner_count(l), map.tree().corner_count(l));
  }
}

TEST(Trainer, LossTraceFileRoundTrip) {
  testutil::TempDir dir("trace");
  const std::vector<LossRecord> trace{{0, 0.69, 0.9, 0.01}, {1, 0.123456789012, 1e-9, 0.001}};
  const std::vector<std::pair<std::string, std::string>> comments{{"map.mode", "decomposition"}};
  write_loss_trace(dir / "loss.csv", trace, comments);
  const auto back = read_loss_trace(dir / "loss.csv");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].iteration, trace[i].iteration);
    EXPECT_EQ(back[i].sdf, trace[i].sdf);
    EXPECT_EQ(back[i].eikonal, trace[i].eikonal);
    EXPECT_EQ(back[i].lr, trace[i].lr);
  }
}

TEST(Trainer, ThroughputWindow) {
  TrainResult r;
  r.elapsed_seconds = {0.5, 1.0, 1.5, 2.0, 2.5};
  EXPECT_DOUBLE_EQ(r.iterations_per_second(1, 4), 2.0);
}

// Sphere from ten scans; Phi is in meters so it is compared to the true SDF directly.
TEST(Trainer, SphereSmokeRunFitsDistanceField) {
  const auto scans = testutil::sphere_scans(10, 48);
  const auto samples = sample_scans(scans, SamplingConfig{}, 1);
  MapConfig mc;
  mc.bitwidth = 4;
  mc.seed = 1;
  NeuralMap<float> map(mc, build_octree(scans, mc.octree));
  map.finalize();
  auto tc = quick_train(2000, 1024);
  tc.adam.decay_step = 1000;
  const auto result = train_batch(map, std::span<const TrainingSample>(samples), tc);

  auto smoothed = [&](std::size_t at) {
    double s = 0;
    for (std::size_t i = at; i < at + 50; ++i) s += result.trace[i].sdf;
    return s / 50;
  };
  EXPECT_LT(smoothed(result.trace.size() - 50), smoothed(0));

  const auto scene = AnalyticScene::named("sphere");
  const auto held_out = sample_scans(scans, SamplingConfig{}, 999);
  double err = 0;
  std::size_t n = 0;
  for (const auto& s : held_out) {
    if (s.cls != SampleClass::near_surface) continue;
    const auto phi = map.sdf(s.x);
    if (!phi) continue;
    err += std::abs(static_cast<double>(*phi) - scene.sdf(s.x));
    ++n;
  }
  ASSERT_GT(n, 1000u);
  EXPECT_LT(err / static_cast<double>(n), 0.05);
}

}  // namespace
