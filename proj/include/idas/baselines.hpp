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

// Rule-based drivers: the rule-following robots used while pre-training,
// plain IDM, and IDM with a finite-state cross-lane rule. All outputs are
// filtered through the same combined mask the learned policy sees.

#pragma once

#include <optional>
#include <utility>

#include "idas/masking.hpp"
#include "idas/sim.hpp"

namespace idas {

// Tunable constants for the rule-based drivers.
inline constexpr double kHardBrakeThreshold = -2.2;   // m/s^2
inline constexpr double kRobotConflictWindow = 3.0;   // s
inline constexpr double kFsmSimilarDistance = 10.0;   // m
inline constexpr double kFsmMinGap = 0.5;             // m, floor for virtual-leader gaps

enum class FsmMode { kFree, kFollowVirtual };

struct FsmState {
  FsmMode mode = FsmMode::kFree;
  std::optional<int> virtual_leader;
  bool operator==(const FsmState&) const = default;
};

/// Picks the permitted action whose resulting acceleration is nearest to
/// `target` (ties go to the lower acceleration); hard brake when the target
/// is below -2.2 m/s^2 or nothing else is permitted.
ActionId quantize_accel(const VehicleState& vehicle, double target, const ActionMask& mask);

/// IDM acceleration against the own-path leader (free road if none).
double idm_target_accel(const WorldState& world, int id);

ActionId robot_action(const WorldState& world, int agent_id);
ActionId idm_action(const WorldState& world, int agent_id);
std::pair<ActionId, FsmState> fsm_idm_action(const WorldState& world, int agent_id,
                                             const FsmState& fsm);

/// Time for the vehicle to reach the merge point at its current speed.
double time_to_merge(const VehicleState& vehicle, const RoadNetwork& road);

}  // namespace idas
