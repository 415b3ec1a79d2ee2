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

#include "idas/masking.hpp"

#include <algorithm>
#include <cmath>

namespace idas {

namespace {

constexpr double kSpeedEps = 1e-9;

// Peak speed reached if, after taking the action, the vehicle keeps easing
// its acceleration down by the largest jerk step until it is no longer
// positive. Checking the peak instead of only the next speed keeps the
// vehicle out of states where every jerk-feasible action overshoots.
double peak_speed_after(const VehicleState& vehicle, ActionId action, double dt) {
  VehicleState sim = integrate(apply_action(vehicle, action), dt);
  double peak = sim.v;
  double a = sim.a;
  double v = sim.v;
  while (a > 0.0) {
    a = snap_accel(a - 0.2);
    v = std::max(0.0, v + a * dt);
    peak = std::max(peak, v);
  }
  return peak;
}

}  // namespace

ActionMask ActionMask::all() {
  ActionMask m;
  m.permitted.fill(true);
  return m;
}

int ActionMask::count() const {
  return static_cast<int>(std::count(permitted.begin(), permitted.end(), true));
}

std::string ActionMask::to_string() const {
  std::string out(kNumActions, '0');
  for (std::size_t i = 0; i < permitted.size(); ++i) {
    if (permitted[i]) out[i] = '1';
  }
  return out;
}

double idm_desired_gap(double v, double v_lead, const IdmParams& p) {
  const double dv = v - v_lead;
  return p.s0 + v * p.time_headway + v * dv / (2.0 * std::sqrt(p.a_max * p.b_comf));
}

double idm_acceleration(double v, std::optional<double> v_lead, std::optional<double> gap,
                        const IdmParams& p) {
  double interaction = 0.0;
  if (v_lead && gap) {
    if (!(*gap > 0.0)) throw Error("idm_acceleration: non-positive gap");
    const double s_star = std::max(0.0, idm_desired_gap(v, *v_lead, p));
    interaction = (s_star / *gap) * (s_star / *gap);
  }
  const double free_term = std::pow(v / p.v0, p.delta);
  const double acc = p.a_max * (1.0 - free_term - interaction);
  return std::clamp(acc, kHardBrakeAccel, kMaxAccel);
}

double applicable_speed_limit(const VehicleState& vehicle, const RoadNetwork& road) {
  const double d = path_coordinate(vehicle, road);
  const auto lane = static_cast<std::size_t>(vehicle.lane);
  if (d >= 0.0) return road.speed_limit[static_cast<std::size_t>(road.main_lane())];
  const double dist_to_merge = -d;
  if (road.is_merge_lane(vehicle.lane) && dist_to_merge > 0.0 &&
      dist_to_merge < road.speed_exemption_radius_m) {
    return std::max(road.speed_limit[0], road.speed_limit[1]);
  }
  return road.speed_limit[lane];
}

IdmParams idm_params_for(const VehicleState& vehicle, const RoadNetwork& road) {
  IdmParams p;
  p.v0 = applicable_speed_limit(vehicle, road);
  return p;
}

double resulting_accel(const VehicleState& vehicle, ActionId action) {
  switch (action) {
    case ActionId::kHardBrake: return kHardBrakeAccel;
    case ActionId::kReleaseBrake: return 0.0;
    default: break;
  }
  return snap_accel(vehicle.a + kDeltaAccel[static_cast<std::size_t>(index_of(action))]);
}

ActionMask kinematic_mask(const VehicleState& vehicle) {
  ActionMask m = ActionMask::all();
  for (int i = 0; i < 5; ++i) {
    const ActionId a = action_from_index(i);
    const double next = resulting_accel(vehicle, a);
    if (next > kMaxAccel + 1e-9 || next < kMinAccel - 1e-9) m.forbid(a);
  }
  if (!vehicle.post_brake) m.forbid(ActionId::kReleaseBrake);
  return m;
}

ActionMask rule_mask(const VehicleState& vehicle, const RoadNetwork& road) {
  ActionMask m = ActionMask::all();
  const double limit = applicable_speed_limit(vehicle, road);
  for (int i = 0; i < kNumActions; ++i) {
    const ActionId a = action_from_index(i);
    if (a == ActionId::kHardBrake) continue;
    if (a == ActionId::kReleaseBrake && !vehicle.post_brake) continue;
    if (peak_speed_after(vehicle, a, kStepSeconds) > limit + kSpeedEps) m.forbid(a);
  }
  return m;
}

ActionMask safety_mask(const VehicleState& vehicle, const WorldState& world,
                       const IdmParams& p) {
  ActionMask m = ActionMask::all();
  const auto leader = find_leader(world, vehicle.id);
  if (!leader) return m;
  const double gap = gap_between(world, vehicle.id, *leader);
  double a_idm = kHardBrakeAccel;
  if (gap > 0.0) a_idm = idm_acceleration(vehicle.v, world.vehicle(*leader).v, gap, p);
  for (int i = 0; i < kNumActions; ++i) {
    const ActionId a = action_from_index(i);
    if (a == ActionId::kHardBrake) continue;
    if (resulting_accel(vehicle, a) > a_idm + kSafetyTolerance) m.forbid(a);
  }
  return m;
}

ActionMask combine_masks(const ActionMask& mk, const ActionMask& mr, const ActionMask& ms) {
  ActionMask out;
  for (std::size_t i = 0; i < out.permitted.size(); ++i) {
    out.permitted[i] = mk.permitted[i] && mr.permitted[i] && ms.permitted[i];
  }
  if (!out.any()) out.permit(ActionId::kHardBrake);
  return out;
}

ActionMask compute_mask(const WorldState& world, int id) {
  const VehicleState& v = world.vehicle(id);
  return combine_masks(kinematic_mask(v), rule_mask(v, world.road),
                       safety_mask(v, world, idm_params_for(v, world.road)));
}

}  // namespace idas
