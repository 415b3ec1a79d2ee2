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

#pragma once

#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "idas/sim.hpp"

namespace idas {

inline constexpr double kImpedeReward = -5.0;
inline constexpr double kFlowReward = -1.0;
inline constexpr double kCauseSearchRadius = 30.0;
inline constexpr double kCrossLaneCauseWindow = 10.0;

enum class RewardTag { kFinish, kCollide, kImpede };

std::string_view reward_tag_name(RewardTag tag);

struct RewardComponent {
  RewardTag tag;
  double value;
};

struct RewardBreakdown {
  std::map<int, double> per_agent;
  std::map<int, std::vector<RewardComponent>> components;
  int flow_events = 0;
  double joint = 0.0;
};

/// (15 b_type + 50) / 4; throws Error outside [-2, 2].
double finish_reward(double b_type);

/// -5 b_prio - 5.
double collide_reward(int b_prio);

/// Vehicle held responsible for `braking_id`'s hard brake, evaluated on the
/// pre-step world: the nearer of the own-path leader and the closest
/// other-lane vehicle within 10 m of merge distance, if within 30 m.
std::optional<int> cause_of_hard_brake(const WorldState& world, int braking_id);

using BrakeAttribution = std::map<int, std::optional<int>>;

/// Attribution for every hard brake in `events`, using the pre-step world.
BrakeAttribution attribute_hard_brakes(const WorldState& pre_step, const StepEvents& events);

/// Rewards for one step. `world` is the post-step world (it supplies b_type
/// and the post-handover b_prio of colliding vehicles).
RewardBreakdown step_rewards(const WorldState& world, const StepEvents& events,
                             const BrakeAttribution& attribution);

/// sum_t gamma^t r_t.
double discounted_return(const std::vector<double>& rewards, double gamma);

}  // namespace idas
