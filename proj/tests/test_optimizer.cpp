#include "dnmap/optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

namespace {

using namespace dnmap;

Parameter<double> block(std::vector<double> value, std::vector<double> grad) {
  Parameter<double> p;
  p.name = "p";
  p.value = std::move(value);
  p.grad = std::move(grad);
  return p;
}

TEST(Adam, FirstStepMovesByLearningRateAgainstSign) {
  auto p = block({1.0, -2.0, 0.5}, {0.3, -7.0, 1e-3});
  Adam<double> adam;
  std::vector<Parameter<double>*> params{&p};
  adam.step(params);
  EXPECT_NEAR(p.value[0], 1.0 - 0.01, 1e-6);
  EXPECT_NEAR(p.value[1], -2.0 + 0.01, 1e-6);
  EXPECT_NEAR(p.value[2], 0.5 - 0.01, 1e-5);
  EXPECT_EQ(adam.step_count(), 1);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  auto p = block({1.0, 2.0}, {0.0, 0.0});
  Adam<double> adam;
  std::vector<Parameter<double>*> params{&p};
  for (int i = 0; i < 5; ++i) adam.step(params);
  EXPECT_EQ(p.value, (std::vector<double>{1.0, 2.0}));
}

TEST(Adam, MomentsDecayAfterGradientStops) {
  auto p = block({0.0}, {1.0});
  Adam<double> adam;
  std::vector<Parameter<double>*> params{&p};
  adam.step(params);
  p.grad[0] = 0.0;
  double last = p.value[0];
  double prev_move = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 20; ++i) {
    adam.step(params);
    const double move = std::abs(p.value[0] - last);
    EXPECT_GT(move, 0.0);
    EXPECT_LT(move, prev_move);
    prev_move = move;
    last = p.value[0];
  }
}

TEST(Adam, MatchesReferenceUpdate) {
  auto p = block({0.2}, {0.0});
  Adam<double> adam;
  std::vector<Parameter<double>*> params{&p};
  double m = 0, v = 0, x = 0.2;
  for (int t = 1; t <= 30; ++t) {
    const double g = std::sin(0.7 * t);
    p.grad[0] = g;
    adam.step(params);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    x -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    ASSERT_NEAR(p.value[0], x, 1e-12) << t;
  }
}

TEST(Adam, ScheduleSwitchesAfterDecayStep) {
  const AdamConfig cfg;
  EXPECT_EQ(cfg.lr_at(1), 0.01);
  EXPECT_EQ(cfg.lr_at(10000), 0.01);
  EXPECT_EQ(cfg.lr_at(10001), 0.001);

  AdamConfig short_cfg;
  short_cfg.decay_step = 2;
  Adam<double> adam(short_cfg);
  auto p = block({0.0}, {1.0});
  std::vector<Parameter<double>*> params{&p};
  EXPECT_EQ(adam.current_lr(), 0.01);
  adam.step(params);
  adam.step(params);
  EXPECT_EQ(adam.current_lr(), 0.001);
}

TEST(Adam, NonFiniteGradientAbortsBeforeAnyUpdate) {
  auto a = block({1.0}, {0.5});
  auto b = block({2.0, 3.0}, {0.1, std::numeric_limits<double>::quiet_NaN()});
  Adam<double> adam;
  std::vector<Parameter<double>*> params{&a, &b};
  EXPECT_THROW(adam.step(params), NonFiniteGradient);
  EXPECT_EQ(a.value[0], 1.0);
  EXPECT_EQ(b.value[0], 2.0);
  EXPECT_EQ(adam.step_count(), 0);
  b.grad[1] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(adam.step(params), NonFiniteGradient);
}

TEST(Adam, BumpsVersionsAndHandlesGrowth) {
  auto p = block({1.0}, {1.0});
  Adam<double> adam;
  std::vector<Parameter<double>*> params{&p};
  adam.step(params);
  EXPECT_EQ(p.version, 1u);
  p.value.push_back(5.0);
  p.grad = {0.0, 2.0};
  adam.step(params);
  EXPECT_EQ(p.version, 2u);
  // The appended entry starts with zero moments but shares the step-2 bias correction.
  const double m = 0.1 * 2.0 / (1 - 0.9 * 0.9);
  const double v = 0.001 * 4.0 / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p.value[1], 5.0 - adam.config().lr_at(2) * m / (std::sqrt(v) + adam.config().eps), 1e-12);
}

TEST(Adam, ConfigValidation) {
  AdamConfig cfg;
  cfg.lr = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.beta1 = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
