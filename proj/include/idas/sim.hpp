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

// Two-lane merging road simulator. Both lanes share one merge point at the
// same arc length; past it they form a single shared segment. Vehicle
// positions are measured at the vehicle center, so two vehicles on the same
// path overlap iff their centers are closer than one vehicle length.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "idas/common.hpp"

namespace idas {

// kRandom samples uniformly among the permitted actions.
enum class Controller : std::uint8_t { kPolicy, kRobot, kIdm, kFsmIdm, kRandom };

std::string_view controller_name(Controller c);
Controller parse_controller(std::string_view name);

struct RoadNetwork {
  double lane_length_m = kLaneLength;
  double merge_point_s = kMergePoint;
  std::array<double, 2> speed_limit = {kMainLaneSpeedLimit, kMergeLaneSpeedLimit};
  std::array<int, 2> lane_priority = {1, 0};
  double merging_zone_radius_m = kMergingZoneRadius;
  double speed_exemption_radius_m = kSpeedExemptionRadius;

  /// Lane whose priority the shared segment carries (lane 0 on ties).
  int main_lane() const {
    return lane_priority[1] > lane_priority[0] ? 1 : 0;
  }
  /// True for the strictly lower-priority lane.
  bool is_merge_lane(int lane) const {
    return lane_priority[lane] < lane_priority[1 - lane];
  }
  void validate() const;
};

struct BehaviorParams {
  int b_prio = 0;
  double b_type = 0.0;
};

struct VehicleState {
  int id = 0;
  int lane = 0;
  double s = 0.0;
  double v = 0.0;
  double a = 0.0;
  BehaviorParams behavior;
  Controller controller = Controller::kPolicy;
  bool post_brake = false;
  bool active = false;
  bool finished = false;
  bool collided = false;

  // Schedule and bookkeeping.
  double entry_time_s = 0.0;
  double initial_s = 0.0;
  double initial_v = 0.0;
  int entry_step = -1;
  int merge_step = -1;  // first step at which the center reached the merge point
  int finish_step = -1;

  bool pending() const { return !active && !finished && !collided; }
  bool done() const { return finished || collided; }
};

struct StepEvents {
  std::vector<std::pair<int, int>> collisions;
  std::vector<int> finishes;
  std::vector<int> hard_brakes;
  std::vector<int> hard_brakes_in_zone;

  bool empty() const {
    return collisions.empty() && finishes.empty() && hard_brakes.empty();
  }
};

struct WorldState {
  RoadNetwork road;
  std::vector<VehicleState> vehicles;  // indexed by id
  int t = 0;
  double dt = kStepSeconds;
  StepEvents events;

  const VehicleState& vehicle(int id) const { return vehicles.at(static_cast<std::size_t>(id)); }
  VehicleState& vehicle(int id) { return vehicles.at(static_cast<std::size_t>(id)); }
  double time_s() const { return t * dt; }
  bool any_active() const;
};

using JointAction = std::map<int, ActionId>;

struct ScenarioEntry {
  int lane = 0;
  double entry_time_s = 0.0;
  double initial_s = 0.0;
  double initial_v = 0.0;
  double b_type = 0.0;
  Controller controller = Controller::kPolicy;
  bool operator==(const ScenarioEntry&) const = default;
};

struct ScenarioSpec {
  std::uint64_t seed = 0;
  std::array<double, 2> speed_limit = {kMainLaneSpeedLimit, kMergeLaneSpeedLimit};
  std::array<int, 2> lane_priority = {1, 0};
  std::vector<ScenarioEntry> entries;

  RoadNetwork road() const;
  /// Throws Error naming the violated invariant.
  void validate() const;
  bool operator==(const ScenarioSpec&) const = default;
};

struct ScenarioRandomization {
  int min_agents = 2;
  int max_agents = 8;
  double entry_window_s = 10.0;  // scheduled entries arrive in (0, window]
  double min_initial_v = 8.0;
  double max_initial_v = 20.0;
  double preplace_fraction = 0.5;  // share of vehicles present at t = 0
  double max_initial_s = 100.0;    // pre-placed vehicles start in [0, max]
  double equal_priority_prob = 0.0;
  Controller controller = Controller::kPolicy;
  void validate() const;
};

/// Merge-aligned coordinate: negative before the merge point, positive after.
double path_coordinate(const VehicleState& vehicle, const RoadNetwork& road);

/// True if the two vehicles currently sit on the same physical path.
bool share_path(const VehicleState& a, const VehicleState& b, const RoadNetwork& road);

/// Rounds accelerations onto the 0.1 m/s^2 action lattice.
double snap_accel(double a);

/// Applies one action; throws ContractViolation for release_brake without a
/// preceding hard brake.
VehicleState apply_action(const VehicleState& vehicle, ActionId action);

/// Constant-acceleration step that never reverses.
VehicleState integrate(const VehicleState& vehicle, double dt);

/// Vehicle pairs (i < j) whose bodies overlap on a shared path.
std::vector<std::pair<int, int>> detect_collisions(const WorldState& world);

/// Nearest active vehicle ahead of `id` on its forward path: same-lane
/// vehicles ahead, plus any vehicle already on the shared segment ahead.
std::optional<int> find_leader(const WorldState& world, int id);

/// Nearest leader for a hypothetical vehicle at (lane, d); used for entries.
std::optional<int> find_leader_at(const WorldState& world, int lane, double d, int exclude_id);
std::optional<int> find_follower_at(const WorldState& world, int lane, double d, int exclude_id);

/// Bumper-to-bumper gap between `id` and `leader_id`.
double gap_between(const WorldState& world, int id, int leader_id);

WorldState make_world(const ScenarioSpec& spec);

/// Synchronous step. Returns the new world; its `events` field holds the
/// events produced by this step.
WorldState step_world(const WorldState& world, const JointAction& joint_action);

/// True if a vehicle placed at t = 0 per `e` keeps the minimum gap to every
/// vehicle in `placed` on its path and no follower needs more than
/// comfortable braking.
bool placement_compatible(const ScenarioEntry& e, const std::vector<ScenarioEntry>& placed,
                          const RoadNetwork& road);

/// Deterministic in the seed. Throws Error when the configuration cannot be
/// satisfied.
ScenarioSpec generate_scenario(std::uint64_t seed, const ScenarioRandomization& config);

}  // namespace idas
