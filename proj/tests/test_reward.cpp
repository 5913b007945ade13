#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "uavland/env.hpp"
#include "uavland/reward.hpp"

using namespace uavland;
using reward::ShapingInput;
using reward::shaping;

TEST(Shaping, PointValues) {
  EXPECT_EQ(shaping({0, 0, 0, 0, 0, 0, 0, 0, 1}), 20.0);
  EXPECT_EQ(shaping({3, 4, 0, 0, 0, 0, 0, 0, 0}), -500.0);
  EXPECT_DOUBLE_EQ(shaping({0, 0, 0, 0.6, 0.8, 0, 0, 0, 0}), -10.0);
  EXPECT_DOUBLE_EQ(shaping({0, 0, 0, 0, 0, 0, 1, 0, 1}), 9.0);
}

TEST(Shaping, RejectsNonFinite) {
  EXPECT_THROW(shaping({std::nan(""), 0, 0, 0, 0, 0, 0, 0, 0}), std::domain_error);
  EXPECT_THROW(shaping({0, 0, 0, 0, 0, 0, 0, 0, std::numeric_limits<double>::infinity()}),
               std::domain_error);
}

TEST(StepReward, Difference) {
  EXPECT_EQ(reward::step_reward(-10, -20), 10.0);
  for (double x : {-3.5, 0.0, 1e6, 42.25}) EXPECT_EQ(reward::step_reward(x, x), 0.0);
}

TEST(LandedBonus, Ordering) {
  EXPECT_EQ(reward::landed_bonus_C(Zone::None), 0.0);
  EXPECT_EQ(reward::landed_bonus_C(Zone::Off), 0.0);
  EXPECT_EQ(reward::landed_bonus_C(Zone::Green), 1.0);
  EXPECT_EQ(reward::landed_bonus_C(Zone::Red), 2.0);
}

TEST(Shaping, RotationInvariance) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-2, 2), ang(0, 6.283185307179586);
  for (int i = 0; i < 200; ++i) {
    ShapingInput in{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), u(rng) / 2, u(rng) / 2, 1.0};
    const double t = ang(rng), c = std::cos(t), s = std::sin(t);
    ShapingInput r = in;
    r.p_x = c * in.p_x - s * in.p_y;
    r.p_y = s * in.p_x + c * in.p_y;
    r.v_y = c * in.v_y - s * in.v_z;
    r.v_z = s * in.v_y + c * in.v_z;
    EXPECT_NEAR(shaping(in), shaping(r), 1e-9);
  }
}

TEST(Shaping, CloserIsBetter) {
  Rng rng(4);
  std::uniform_real_distribution<double> u(-2, 2), shrink(0.1, 0.99);
  for (int i = 0; i < 200; ++i) {
    ShapingInput far{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), 0.3, -0.2, 0.0};
    ShapingInput near = far;
    const double k = shrink(rng);
    near.p_x *= k;
    near.p_y *= k;
    near.p_z *= k;
    EXPECT_GT(shaping(near), shaping(far));
  }
}

TEST(StepReward, EpisodeSumTelescopes) {
  ScenarioConfig cfg;
  LandingEnv env(cfg);
  Rng rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int e = 0; e < 200; ++e) {
    const VehicleState s0 = env.reset(rng);
    const double shaping0 = shaping(reward::make_input(s0, {}, 0.0));
    double sum = 0.0;
    StepOutcome out;
    ActionCmd a;
    do {
      a = {u(rng), u(rng)};
      out = env.step(a);
      sum += out.reward;
    } while (!out.done);
    const double C = out.termination == Termination::Landed ? reward::landed_bonus_C(out.zone) : 0.0;
    const double shapingT = shaping(reward::make_input(out.next_state, a, C));
    EXPECT_NEAR(sum, shapingT - shaping0, 1e-9 * std::max(1.0, std::abs(shapingT)));
  }
}

TEST(StepReward, BonusOnlyAtTouchdown) {
  LandingEnv env;
  env.reset(std::uint64_t{1});
  StepOutcome out = env.step({0, 0});
  ASSERT_FALSE(out.done);
  const double expected_now = shaping(reward::make_input(out.next_state, {0, 0}, 0.0));
  const double expected_prev = shaping(reward::make_input(env.reset(std::uint64_t{1}), {}, 0.0));
  EXPECT_DOUBLE_EQ(out.reward, expected_now - expected_prev);
}
