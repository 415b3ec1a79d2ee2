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

#include "idas/rewards.hpp"

#include <cmath>
#include <limits>

namespace idas {

std::string_view reward_tag_name(RewardTag tag) {
  switch (tag) {
    case RewardTag::kFinish: return "finish";
    case RewardTag::kCollide: return "collide";
    case RewardTag::kImpede: return "impede";
  }
  return "?";
}

double finish_reward(double b_type) {
  if (!(b_type >= -2.0 && b_type <= 2.0)) throw Error("finish_reward: b_type outside [-2, 2]");
  return (15.0 * b_type + 50.0) / 4.0;
}

double collide_reward(int b_prio) { return -5.0 * b_prio - 5.0; }

std::optional<int> cause_of_hard_brake(const WorldState& world, int braking_id) {
  const VehicleState& self = world.vehicle(braking_id);
  const double d_self = path_coordinate(self, world.road);
  std::optional<int> best;
  double best_sep = std::numeric_limits<double>::infinity();
  if (auto lead = find_leader(world, braking_id)) {
    best_sep = path_coordinate(world.vehicle(*lead), world.road) - d_self;
    best = lead;
  }
  for (const VehicleState& o : world.vehicles) {
    if (!o.active || o.id == braking_id || share_path(self, o, world.road)) continue;
    const double sep = std::abs(path_coordinate(o, world.road) - d_self);
    if (sep <= kCrossLaneCauseWindow && sep < best_sep) {
      best_sep = sep;
      best = o.id;
    }
  }
  if (!best || best_sep > kCauseSearchRadius) return std::nullopt;
  return best;
}

BrakeAttribution attribute_hard_brakes(const WorldState& pre_step, const StepEvents& events) {
  BrakeAttribution out;
  for (int id : events.hard_brakes) out[id] = cause_of_hard_brake(pre_step, id);
  return out;
}

RewardBreakdown step_rewards(const WorldState& world, const StepEvents& events,
                             const BrakeAttribution& attribution) {
  RewardBreakdown out;
  auto add = [&out](int id, RewardTag tag, double value) {
    out.per_agent[id] += value;
    out.components[id].push_back({tag, value});
  };
  for (int id : events.finishes) {
    add(id, RewardTag::kFinish, finish_reward(world.vehicle(id).behavior.b_type));
  }
  for (const auto& [i, j] : events.collisions) {
    add(i, RewardTag::kCollide, collide_reward(world.vehicle(i).behavior.b_prio));
    add(j, RewardTag::kCollide, collide_reward(world.vehicle(j).behavior.b_prio));
  }
  for (const auto& [braking, cause] : attribution) {
    if (cause && *cause != braking) add(*cause, RewardTag::kImpede, kImpedeReward);
  }
  out.flow_events = static_cast<int>(events.hard_brakes_in_zone.size());
  double sum = 0.0;
  for (const auto& [id, r] : out.per_agent) sum += r;
  out.joint = sum + kFlowReward * out.flow_events;
  return out;
}

double discounted_return(const std::vector<double>& rewards, double gamma) {
  double total = 0.0;
  double scale = 1.0;
  for (double r : rewards) {
    total += scale * r;
    scale *= gamma;
  }
  return total;
}

}  // namespace idas
