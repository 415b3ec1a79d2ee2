// Copyright 2026 The IDAS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "idas/masking.hpp"
#include "test_util.hpp"

namespace idas {
namespace {

using testing::car;
using testing::world_of;

// Independent evaluation of the car-following law with the default
// parameters, unclamped.
double idm_oracle(double v, double v_lead, double gap, double v0) {
  const double s_star = 2.0 + v * 1.5 + v * (v - v_lead) / (2.0 * std::sqrt(2.0 * 2.0));
  return 2.0 * (1.0 - std::pow(v / v0, 4.0) - std::pow(std::max(0.0, s_star) / gap, 2.0));
}

TEST(Idm, FreeRoadEquilibrium) {
  IdmParams p;
  EXPECT_DOUBLE_EQ(idm_acceleration(20.0, std::nullopt, std::nullopt, p), 0.0);
}

TEST(Idm, StoppedAtMinimumGap) {
  IdmParams p;
  EXPECT_DOUBLE_EQ(idm_acceleration(0.0, 0.0, 2.0, p), 0.0);
}

TEST(Idm, ApproachingSlowerLeader) {
  IdmParams p;
  EXPECT_DOUBLE_EQ(idm_desired_gap(15.0, 10.0, p), 43.25);
  const double expected = 2.0 * (1.0 - 0.31640625 - (43.25 / 30.0) * (43.25 / 30.0));
  EXPECT_NEAR(idm_acceleration(15.0, 10.0, 30.0, p), expected, 1e-12);
  EXPECT_NEAR(expected, -2.79, 5e-3);
}

TEST(Idm, ClampAndErrors) {
  IdmParams p;
  EXPECT_EQ(idm_acceleration(20.0, 0.0, 1.0, p), -4.0);
  EXPECT_EQ(idm_acceleration(0.0, std::nullopt, std::nullopt, p), 2.0);
  EXPECT_THROW(idm_acceleration(10.0, 10.0, 0.0, p), Error);
}

TEST(KinematicMask, Bounds) {
  ActionMask m = kinematic_mask(car(0, 0, 0, 10, 2.0));
  EXPECT_FALSE(m.allows(ActionId::kAcc1));
  EXPECT_FALSE(m.allows(ActionId::kAcc2));
  EXPECT_TRUE(m.allows(ActionId::kKeep));
  m = kinematic_mask(car(0, 0, 0, 10, -2.0));
  EXPECT_FALSE(m.allows(ActionId::kDec1));
  EXPECT_FALSE(m.allows(ActionId::kDec2));
  m = kinematic_mask(car(0, 0, 0, 10, 0.0));
  EXPECT_EQ(m.to_string(), "1111110");
}

TEST(KinematicMask, ReleaseOnlyAfterBrake) {
  VehicleState v = car(0, 0, 0, 10);
  v.a = -4.0;
  v.post_brake = true;
  const ActionMask m = kinematic_mask(v);
  EXPECT_TRUE(m.allows(ActionId::kReleaseBrake));
  EXPECT_TRUE(m.allows(ActionId::kHardBrake));
  // From -4, every delta action leaves the acceleration envelope.
  for (int i = 0; i < 5; ++i) EXPECT_FALSE(m.allows(action_from_index(i)));
}

TEST(RuleMask, AtLimit) {
  RoadNetwork road;
  const ActionMask m = rule_mask(car(0, 0, 0, 20, 0.0), road);
  EXPECT_FALSE(m.allows(ActionId::kAcc1));
  EXPECT_FALSE(m.allows(ActionId::kAcc2));
  EXPECT_TRUE(m.allows(ActionId::kKeep));
  EXPECT_TRUE(m.allows(ActionId::kDec1));
}

TEST(RuleMask, MergeLaneExemption) {
  RoadNetwork road;
  // dist_to_merge = 50: the merge lane may use the main-lane limit.
  const VehicleState v = car(0, 1, 100, 15, 0.0);
  EXPECT_DOUBLE_EQ(applicable_speed_limit(v, road), 20.0);
  const ActionMask m = rule_mask(v, road);
  EXPECT_TRUE(m.allows(ActionId::kAcc1));
  EXPECT_TRUE(m.allows(ActionId::kAcc2));
  // Outside the exemption radius the lane's own limit applies.
  EXPECT_DOUBLE_EQ(applicable_speed_limit(car(0, 1, 40, 15), road), 15.0);
  EXPECT_FALSE(rule_mask(car(0, 1, 40, 15, 0.0), road).allows(ActionId::kAcc1));
}

TEST(RuleMask, FromRestNothingForbidden) {
  RoadNetwork road;
  EXPECT_EQ(rule_mask(car(0, 1, 0, 0, 0.0), road), ActionMask::all());
  EXPECT_EQ(rule_mask(car(0, 0, 0, 0, 2.0), road), ActionMask::all());
}

TEST(SafetyMask, NoLeader) {
  const auto w = world_of({car(0, 0, 50, 10)});
  EXPECT_EQ(safety_mask(w.vehicle(0), w, IdmParams{}), ActionMask::all());
}

TEST(SafetyMask, StoppedAtMinimumGap) {
  // Centers 6 m apart: bumper gap 2 m.
  const auto w = world_of({car(0, 0, 50, 0), car(1, 0, 56, 0)});
  const ActionMask m = safety_mask(w.vehicle(0), w, IdmParams{});
  EXPECT_TRUE(m.allows(ActionId::kKeep));
  EXPECT_FALSE(m.allows(ActionId::kAcc1));
  EXPECT_FALSE(m.allows(ActionId::kAcc2));
}

TEST(SafetyMask, OnlyHardBrakeWhenLeaderForcesDeceleration) {
  // Equal speeds at a 13.5 m gap: the law asks for about -1.3.
  const auto w = world_of({car(0, 0, 50, 10), car(1, 0, 67.5, 10)});
  const double a_idm = idm_oracle(10.0, 10.0, 13.5, 20.0);
  ASSERT_LT(a_idm, -1.0);
  ASSERT_GT(a_idm, -2.0);
  const ActionMask m = safety_mask(w.vehicle(0), w, IdmParams{});
  EXPECT_EQ(m.to_string(), "0000010");
}

// Property: an action is permitted iff its resulting acceleration is at most
// the law's value plus the tolerance.
TEST(SafetyMask, MatchesOracle) {
  Rng rng(7);
  for (int k = 0; k < 2000; ++k) {
    const double v = uniform(rng, 0.0, 20.0);
    const double vl = uniform(rng, 0.0, 20.0);
    const double gap = uniform(rng, 0.5, 80.0);
    const double a = snap_accel(uniform(rng, -2.0, 2.0));
    const auto w = world_of({car(0, 0, 20, v, a), car(1, 0, 20 + 4 + gap, vl)});
    const double a_idm = std::clamp(idm_oracle(v, vl, gap, 20.0), -4.0, 2.0);
    const ActionMask m = safety_mask(w.vehicle(0), w, IdmParams{});
    for (int i = 0; i < kNumActions; ++i) {
      const ActionId act = action_from_index(i);
      if (act == ActionId::kHardBrake) {
        EXPECT_TRUE(m.allows(act));
        continue;
      }
      const double next = resulting_accel(w.vehicle(0), act);
      if (std::abs(next - (a_idm + kSafetyTolerance)) < 1e-9) continue;
      EXPECT_EQ(m.allows(act), next <= a_idm + kSafetyTolerance)
          << "v=" << v << " vl=" << vl << " gap=" << gap << " a=" << a << " action=" << i;
    }
  }
}

TEST(CombineMasks, IntersectionAndFallback) {
  const ActionMask all = ActionMask::all();
  EXPECT_EQ(combine_masks(all, all, all), all);
  ActionMask mk = all, ms = all;
  mk.forbid(ActionId::kAcc2);
  ms.forbid(ActionId::kAcc1);
  const ActionMask c = combine_masks(mk, all, ms);
  EXPECT_FALSE(c.allows(ActionId::kAcc1));
  EXPECT_FALSE(c.allows(ActionId::kAcc2));
  EXPECT_TRUE(c.allows(ActionId::kKeep));
  EXPECT_EQ(combine_masks(ActionMask::none(), all, all).to_string(), "0000010");
}

TEST(ComputeMask, NeverEmptyOnRandomWorlds) {
  ScenarioRandomization r;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    WorldState w = make_world(generate_scenario(seed, r));
    Rng rng(seed);
    for (int t = 0; t < 200 && w.any_active(); ++t) {
      JointAction joint;
      for (const auto& v : w.vehicles) {
        if (!v.active) continue;
        const ActionMask m = compute_mask(w, v.id);
        ASSERT_TRUE(m.any());
        std::vector<int> allowed;
        for (int i = 0; i < kNumActions; ++i) {
          if (m.permitted[static_cast<std::size_t>(i)]) allowed.push_back(i);
        }
        const auto pick = uniform_int(rng, 0, static_cast<std::int64_t>(allowed.size()) - 1);
        joint[v.id] = action_from_index(allowed[static_cast<std::size_t>(pick)]);
      }
      w = step_world(w, joint);
    }
  }
}

}  // namespace
}  // namespace idas
