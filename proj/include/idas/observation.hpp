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

#include <array>
#include <iosfwd>

#include "idas/sim.hpp"

namespace idas {

inline constexpr int kGridCells = 400;
inline constexpr double kGridResolution = 0.5;
inline constexpr double kVisibility = 100.0;
inline constexpr int kCellsPerVehicle = 8;  // ceil(vehicle length / resolution)

/// One lane as seen by an agent: 0.5 m cells from 100 m behind to 100 m
/// ahead. Cell k covers offsets [-100 + 0.5k, -100 + 0.5(k+1)).
struct LaneGrid {
  std::array<double, kGridCells> occupancy{};
  std::array<double, kGridCells> rel_speed{};

  int occupied_cells() const;
  bool operator==(const LaneGrid&) const = default;
};

/// Cell containing the given offset relative to the observer, or -1.
int grid_cell(double offset);

struct AgentObservation {
  int priority = 0;
  double driver_type = 0.0;
  double v = 0.0;
  double a = 0.0;
  double dist_to_merge = 0.0;
  bool post_brake = false;
  LaneGrid obs_cl;  // vehicles on the observer's current path
  LaneGrid obs_ol;  // vehicles on the other lane, aligned by distance to merge

  bool operator==(const AgentObservation&) const = default;
};

/// Observation of an active agent. Throws Error for inactive agents.
AgentObservation build_observation(const WorldState& world, int agent_id);

/// Debug dump: 6 scalars (priority, driver type, v, a, dist to merge,
/// post brake) then obs_cl occupancy, obs_cl rel speed, obs_ol occupancy,
/// obs_ol rel speed; every value a little-endian float32.
void write_observation_dump(std::ostream& out, const AgentObservation& obs);
AgentObservation read_observation_dump(std::istream& in);

}  // namespace idas
