#include "dnmap/loss.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace {

using namespace dnmap;

MapConfig two_voxel_config(FeatureMode mode, int dim = 4, int bitwidth = 3, int hidden = 8) {
  MapConfig mc;
  mc.octree.levels = 2;
  mc.octree.leaf_voxel_size = 1.0;
  mc.mode = mode;
  mc.dim = dim;
  mc.bitwidth = bitwidth;
  mc.hidden = hidden;
  mc.seed = 3;
  return mc;
}

// Continuous single-level map whose corner features hold the corner's x
// coordinate, and a decoder wired to output feature 0: Phi(x) = x_0.
NeuralMap<double> linear_field_map() {
  MapConfig mc;
  mc.octree.levels = 1;
  mc.octree.leaf_voxel_size = 1.0;
  mc.mode = FeatureMode::continuous;
  mc.dim = 2;
  mc.hidden = 32;
  const std::vector<Vec3> pts{Vec3(0.5, 0.5, 0.5), Vec3(1.5, 0.5, 0.5)};
  NeuralMap<double> map(mc, SparseOctree::build(pts, mc.octree));
  const auto codes = map.tree().corner_codes_in_slot_order(0);
  auto& e = map.features().embeddings(0).value;
  for (std::size_t s = 0; s < codes.size(); ++s) {
    e[s * 2] = map.tree().voxel_min_corner(0, codes[s]).x();
    e[s * 2 + 1] = 0.0;
  }
  auto& th = map.decoder().params().value;
  std::fill(th.begin(), th.end(), 0.0);
  const std::size_t H = 32, D = 2, w2 = H * D + H, w3 = w2 + H * H + H;
  th[0] = 1.0;
  th[D] = -1.0;
  th[w2] = 1.0;
  th[w2 + H + 1] = 1.0;
  th[w3] = 1.0;
  th[w3 + 1] = -1.0;
  ++map.decoder().params().version;
  return map;
}

TEST(Loss, ZeroLogitZeroLabelIsLn2) {
  EXPECT_NEAR(sdf_loss(0.0, 0.0, 0.05), std::numbers::ln2, 1e-12);
  EXPECT_NEAR(sdf_loss(0.0f, 0.0f, 0.05f), static_cast<float>(std::numbers::ln2), 1e-6f);
}

TEST(Loss, MatchedLogitGivesBinaryEntropyMinimum) {
  const double s = 0.05;
  for (double label : {-0.1, -0.02, 0.0, 0.03, 0.12}) {
    const double y = sigmoid(label / s);
    const double entropy = -(y * std::log(y) + (1 - y) * std::log(1 - y));
    const double at = sdf_loss(label / s, label, s);
    EXPECT_NEAR(at, entropy, 1e-9);
    EXPECT_LE(at, sdf_loss(label / s + 0.3, label, s));
    EXPECT_LE(at, sdf_loss(label / s - 0.3, label, s));
  }
}

TEST(Loss, ClosedFormGradientMatchesFiniteDifference) {
  const double s = 0.05, h = 1e-6;
  for (double logit : {-3.0, -0.4, 0.0, 0.9, 5.0}) {
    for (double label : {-0.1, 0.0, 0.07}) {
      const double fd = (sdf_loss(logit + h, label, s) - sdf_loss(logit - h, label, s)) / (2 * h);
      const double g = sdf_loss_grad(logit, label, s);
      EXPECT_NEAR(g, sigmoid(logit) - sigmoid(label / s), 1e-15);
      EXPECT_LT(testutil::relative_error(g, fd), 1e-6) << logit << " " << label;
    }
  }
}

TEST(Loss, ExtremeLogitsStayFinite) {
  for (double logit : {-1e6, -40.0, 40.0, 1e6}) {
    EXPECT_TRUE(std::isfinite(sdf_loss(logit, 0.1, 0.05)));
    EXPECT_TRUE(std::isfinite(sdf_loss_grad(logit, -0.1, 0.05)));
  }
  EXPECT_TRUE(std::isfinite(sdf_loss(1e6f, -1e3f, 0.05f)));
}

TEST(Loss, SaturatedLogitKeepsSlope) {
  EXPECT_EQ(sdf_loss(40.0, -0.1, 0.05), sdf_loss(400.0, -0.1, 0.05));
  EXPECT_NEAR(sdf_loss_grad(400.0, -0.1, 0.05), 1.0 - sigmoid(-2.0), 1e-6);
  EXPECT_NEAR(sdf_loss_grad(-400.0, 0.1, 0.05), -sigmoid(2.0), 1e-6);
}

TEST(Loss, EikonalOfUnitFieldIsZero) {
  const auto map = linear_field_map();
  const auto g = sdf_gradient(map, Vec3(0.7, 0.4, 0.6), 0.05);
  ASSERT_TRUE(g.has_value());
  EXPECT_NEAR((*g - Eigen::Vector3d(1, 0, 0)).norm(), 0.0, 1e-9);
  EXPECT_NEAR(eikonal_loss(*g), 0.0, 1e-12);
  EXPECT_NEAR(*map.sdf(Vec3(1.3, 0.2, 0.9)), 1.3, 1e-12);
}

TEST(Loss, EikonalOfConstantFieldIsOne) {
  MapConfig mc = two_voxel_config(FeatureMode::continuous);
  NeuralMap<double> map(mc, testutil::two_voxel_tree());
  auto& th = map.decoder().params().value;
  std::fill(th.begin(), th.end(), 0.0);
  th.back() = 0.3;
  ++map.decoder().params().version;
  const auto g = sdf_gradient(map, Vec3(0.5, 0.5, 0.5), 0.05);
  ASSERT_TRUE(g.has_value());
  EXPECT_EQ(eikonal_loss(*g), 1.0);
  EXPECT_FALSE(sdf_gradient(map, Vec3(50, 0, 0), 0.05).has_value());
}

TEST(Loss, LambdaZeroReducesToSdfTerm) {
  MapConfig mc = two_voxel_config(FeatureMode::decomposition);
  NeuralMap<double> map(mc, testutil::two_voxel_tree());
  testutil::randomize(map, 4);
  const auto batch = testutil::two_voxel_batch(32, 5);
  LossConfig cfg;
  cfg.lambda = 0;
  const auto st = total_loss(map, std::span<const TrainingSample>(batch), cfg, QueryPath::efficient, 1, false);
  double mean = 0;
  for (const auto& s : batch) mean += sdf_loss(*map.sdf(s.x, Pass::train) / cfg.sigma, s.label, cfg.sigma);
  mean /= static_cast<double>(batch.size());
  EXPECT_NEAR(st.total, mean, 1e-12);
  EXPECT_EQ(st.eikonal_count, 0u);
}

TEST(Loss, IdenticalSamplesEqualSingleSample) {
  MapConfig mc = two_voxel_config(FeatureMode::decomposition);
  NeuralMap<double> map(mc, testutil::two_voxel_tree());
  testutil::randomize(map, 6);
  const auto one = testutil::two_voxel_batch(1, 7);
  const std::vector<TrainingSample> many(9, one[0]);
  const LossConfig cfg;
  const auto a = total_loss(map, std::span<const TrainingSample>(one), cfg, QueryPath::efficient, 1, false);
  const auto b = total_loss(map, std::span<const TrainingSample>(many), cfg, QueryPath::efficient, 1, false);
  EXPECT_NEAR(a.total, b.total, 1e-12);
  EXPECT_EQ(b.used, 9u);
}

TEST(Loss, OutOfMapSamplesAreDropped) {
  MapConfig mc = two_voxel_config(FeatureMode::decomposition);
  NeuralMap<double> map(mc, testutil::two_voxel_tree());
  testutil::randomize(map, 8);
  auto batch = testutil::two_voxel_batch(10, 9);
  const LossConfig cfg;
  const auto inside = total_loss(map, std::span<const TrainingSample>(batch), cfg, QueryPath::efficient, 1, false);
  batch.push_back({Vec3(40, 40, 40), 0.0, SampleClass::near_surface});
  const auto mixed = total_loss(map, std::span<const TrainingSample>(batch), cfg, QueryPath::efficient, 1, false);
  EXPECT_EQ(mixed.used, 10u);
  EXPECT_NEAR(mixed.total, inside.total, 1e-12);
}

TEST(Loss, ThreadCountDoesNotChangeValue) {
  MapConfig mc = two_voxel_config(FeatureMode::decomposition);
  NeuralMap<double> map(mc, testutil::two_voxel_tree());
  testutil::randomize(map, 10);
  const auto batch = testutil::two_voxel_batch(200, 11);
  const LossConfig cfg;
  const auto a = total_loss(map, std::span<const TrainingSample>(batch), cfg, QueryPath::efficient, 1, false);
  const auto b = total_loss(map, std::span<const TrainingSample>(batch), cfg, QueryPath::efficient, 4, false);
  EXPECT_NEAR(a.total, b.total, 1e-12);
}

TEST(Loss, ComponentGradientMatchesFiniteDifference) {
  MapConfig mc = two_voxel_config(FeatureMode::decomposition_discrete_only, 8, 4, 32);
  NeuralMap<double> map(mc, testutil::two_voxel_tree());
  testutil::randomize(map.features().parameters(), 12, 0.1);
  const auto batch = testutil::two_voxel_batch(16, 13);
  const LossConfig cfg;
  // The oracle only holds where the loss is smooth, inside the logit clamp.
  for (const auto& s : batch) ASSERT_LT(std::abs(*map.sdf(s.x) / cfg.sigma), kLogitClamp);
  map.zero_grad();
  total_loss(map, std::span<const TrainingSample>(batch), cfg, QueryPath::efficient, 1, true);
  auto& comps = map.features().components();
  const double h = 1e-6;
  for (std::size_t i : {0ul, 9ul, 20ul, 47ul, 70ul}) {
    const double keep = comps.value[i];
    comps.value[i] = keep + h;
    ++comps.version;
    const double up = total_loss(map, std::span<const TrainingSample>(batch), cfg, QueryPath::efficient, 1, false).total;
    comps.value[i] = keep - h;
    ++comps.version;
    const double down = total_loss(map, std::span<const TrainingSample>(batch), cfg, QueryPath::efficient, 1, false).total;
    comps.value[i] = keep;
    ++comps.version;
    EXPECT_LT(testutil::relative_error(comps.grad[i], (up - down) / (2 * h), 1e-6), 1e-3) << i;
  }
}

class LossGradientSweep
    : public ::testing::TestWithParam<std::tuple<FeatureMode, QueryPath>> {};

TEST_P(LossGradientSweep, EveryScalarMatchesFiniteDifference) {
  const auto [mode, path] = GetParam();
  MapConfig mc = two_voxel_config(mode);
  NeuralMap<double> map(mc, testutil::two_voxel_tree());
  const auto batch = testutil::two_voxel_batch(24, 15);
  testutil::randomize_differentiable(map, batch, LossConfig{}, 14);
  const auto r = testutil::gradient_sweep(map, batch, LossConfig{}, path);
  EXPECT_GT(r.checked, 100u);
  EXPECT_EQ(r.skipped, 0u);
  EXPECT_LE(r.worst, 1e-3) << "worst entry " << r.worst_name << ": analytic " << r.worst_analytic
                           << ", finite difference " << r.worst_fd;
}

INSTANTIATE_TEST_SUITE_P(
    ModesAndPaths, LossGradientSweep,
    ::testing::Combine(::testing::Values(FeatureMode::continuous, FeatureMode::indexing,
                                         FeatureMode::decomposition_naive,
                                         FeatureMode::decomposition_discrete_only,
                                         FeatureMode::decomposition),
                       ::testing::Values(QueryPath::efficient, QueryPath::basic)),
    [](const auto& info) {
      return std::string(to_string(std::get<0>(info.param))) + "_" +
             std::string(to_string(std::get<1>(info.param)));
    });

}  // namespace
