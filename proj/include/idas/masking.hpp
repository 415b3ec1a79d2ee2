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

// Action masks. Each mask is stored as the set of *permitted* actions; the
// combined mask forbids the union of what the kinematic, traffic-rule and
// safety masks forbid.

#pragma once

#include <array>
#include <optional>
#include <string>

#include "idas/common.hpp"
#include "idas/sim.hpp"

namespace idas {

struct ActionMask {
  std::array<bool, kNumActions> permitted{};

  static ActionMask all();
  static ActionMask none() { return {}; }

  bool allows(ActionId a) const { return permitted[static_cast<std::size_t>(index_of(a))]; }
  void forbid(ActionId a) { permitted[static_cast<std::size_t>(index_of(a))] = false; }
  void permit(ActionId a) { permitted[static_cast<std::size_t>(index_of(a))] = true; }
  int count() const;
  bool any() const { return count() > 0; }
  /// "1111101"-style string, one character per action id.
  std::string to_string() const;
  bool operator==(const ActionMask&) const = default;
};

struct IdmParams {
  double a_max = 2.0;
  double b_comf = 2.0;
  double v0 = kMainLaneSpeedLimit;
  double delta = 4.0;
  double s0 = kMinGap;
  double time_headway = 1.5;
};

/// Intelligent Driver Model acceleration, clamped to [-4, 2]. Without a
/// leader the interaction term vanishes. Throws Error for gap <= 0.
double idm_acceleration(double v, std::optional<double> v_lead,
                        std::optional<double> gap, const IdmParams& p);

/// IDM desired gap s*(v, dv).
double idm_desired_gap(double v, double v_lead, const IdmParams& p);

/// Speed limit in force for this vehicle right now: own lane limit; on the
/// merge lane within the exemption radius, the higher of both limits; on the
/// shared segment, the main lane's limit.
double applicable_speed_limit(const VehicleState& vehicle, const RoadNetwork& road);

/// Acceleration after taking `action` from `vehicle` (no integration).
double resulting_accel(const VehicleState& vehicle, ActionId action);

ActionMask kinematic_mask(const VehicleState& vehicle);
ActionMask rule_mask(const VehicleState& vehicle, const RoadNetwork& road);
ActionMask safety_mask(const VehicleState& vehicle, const WorldState& world,
                       const IdmParams& p);
ActionMask combine_masks(const ActionMask& mk, const ActionMask& mr, const ActionMask& ms);

/// IDM parameters for `vehicle` with v0 set to its applicable limit.
IdmParams idm_params_for(const VehicleState& vehicle, const RoadNetwork& road);

/// Combined mask for an active vehicle in `world`.
ActionMask compute_mask(const WorldState& world, int id);

inline constexpr double kSafetyTolerance = 0.05;

}  // namespace idas
