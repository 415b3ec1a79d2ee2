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

#include "idas/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace idas {

namespace {

constexpr double kTieEps = 1e-9;
constexpr double kMinSpeedForEta = 1.0;

double idm_against(const VehicleState& self, const RoadNetwork& road, double v_lead,
                   double gap) {
  const IdmParams p = idm_params_for(self, road);
  return idm_acceleration(self.v, v_lead, std::max(gap, kFsmMinGap), p);
}

}  // namespace

ActionId quantize_accel(const VehicleState& vehicle, double target, const ActionMask& mask) {
  if (target < kHardBrakeThreshold) return ActionId::kHardBrake;
  std::optional<ActionId> best;
  double best_dist = std::numeric_limits<double>::infinity();
  double best_acc = 0.0;
  for (int i = 0; i < kNumActions; ++i) {
    const ActionId a = action_from_index(i);
    if (a == ActionId::kHardBrake || !mask.allows(a)) continue;
    const double acc = resulting_accel(vehicle, a);
    const double dist = std::abs(acc - target);
    if (dist < best_dist - kTieEps || (dist <= best_dist + kTieEps && acc < best_acc)) {
      best = a;
      best_dist = dist;
      best_acc = acc;
    }
  }
  // Hard brake also competes on distance once the vehicle is already braking.
  if (mask.allows(ActionId::kHardBrake) &&
      std::abs(kHardBrakeAccel - target) < best_dist - kTieEps) {
    return ActionId::kHardBrake;
  }
  return best.value_or(ActionId::kHardBrake);
}

double idm_target_accel(const WorldState& world, int id) {
  const VehicleState& self = world.vehicle(id);
  const IdmParams p = idm_params_for(self, world.road);
  if (auto lead = find_leader(world, id)) {
    const double gap = gap_between(world, id, *lead);
    if (gap <= 0.0) return kHardBrakeAccel;
    return idm_acceleration(self.v, world.vehicle(*lead).v, gap, p);
  }
  return idm_acceleration(self.v, std::nullopt, std::nullopt, p);
}

double time_to_merge(const VehicleState& vehicle, const RoadNetwork& road) {
  const double dist = road.merge_point_s - vehicle.s;
  return dist / std::max(vehicle.v, kMinSpeedForEta);
}

ActionId robot_action(const WorldState& world, int agent_id) {
  const VehicleState& self = world.vehicle(agent_id);
  double target = idm_target_accel(world, agent_id);
  const double d_self = path_coordinate(self, world.road);
  if (world.road.is_merge_lane(self.lane) && d_self < 0.0) {
    // Yield to any main-lane vehicle arriving within the conflict window by
    // stopping behind a virtual vehicle parked at the merge point.
    const double eta_self = time_to_merge(self, world.road);
    for (const VehicleState& o : world.vehicles) {
      if (!o.active || o.lane == self.lane) continue;
      if (path_coordinate(o, world.road) >= 0.0) continue;  // already a real leader
      const double eta_other = time_to_merge(o, world.road);
      if (std::abs(eta_other - eta_self) <= kRobotConflictWindow) {
        const double gap = -d_self;
        target = std::min(target, idm_against(self, world.road, 0.0, gap));
      }
    }
  }
  return quantize_accel(self, target, compute_mask(world, agent_id));
}

ActionId idm_action(const WorldState& world, int agent_id) {
  const VehicleState& self = world.vehicle(agent_id);
  return quantize_accel(self, idm_target_accel(world, agent_id), compute_mask(world, agent_id));
}

std::pair<ActionId, FsmState> fsm_idm_action(const WorldState& world, int agent_id,
                                             const FsmState& fsm) {
  (void)fsm;  // the mode is recomputed from the current scene every step
  const VehicleState& self = world.vehicle(agent_id);
  const double d_self = path_coordinate(self, world.road);
  std::optional<int> candidate;
  double best = std::numeric_limits<double>::infinity();
  for (const VehicleState& o : world.vehicles) {
    if (!o.active || o.id == agent_id || share_path(self, o, world.road)) continue;
    const double d_other = path_coordinate(o, world.road);
    const double diff = d_other - d_self;
    if (diff < 0.0 || diff >= kFsmSimilarDistance) continue;
    if (diff < best) {
      best = diff;
      candidate = o.id;
    }
  }
  FsmState next;
  double target = idm_target_accel(world, agent_id);
  if (candidate) {
    next.mode = FsmMode::kFollowVirtual;
    next.virtual_leader = candidate;
    const VehicleState& o = world.vehicle(*candidate);
    const double gap = path_coordinate(o, world.road) - d_self - kVehicleLength;
    target = std::min(target, idm_against(self, world.road, o.v, gap));
  }
  return {quantize_accel(self, target, compute_mask(world, agent_id)), next};
}

}  // namespace idas
