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

#include "idas/observation.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

namespace idas {

namespace {

// Rasterizes a vehicle centered at `offset` over 8 cells. Where two vehicles
// would overlap a cell, the one nearer the observer wins.
void rasterize(LaneGrid& grid, std::array<double, kGridCells>& owner_dist, double offset,
               double rel_speed) {
  if (std::abs(offset) > kVisibility) return;
  const int center = static_cast<int>(std::floor((offset + kVisibility) / kGridResolution));
  const int first = center - kCellsPerVehicle / 2;
  for (int k = first; k < first + kCellsPerVehicle; ++k) {
    if (k < 0 || k >= kGridCells) continue;
    const auto idx = static_cast<std::size_t>(k);
    if (grid.occupancy[idx] > 0.0 && owner_dist[idx] <= std::abs(offset)) continue;
    grid.occupancy[idx] = 1.0;
    grid.rel_speed[idx] = rel_speed;
    owner_dist[idx] = std::abs(offset);
  }
}

void put_f32(std::ostream& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff),
                         static_cast<char>((bits >> 24) & 0xff)};
  out.write(bytes, 4);
}

double get_f32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw Error("observation dump truncated");
  const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                             (static_cast<std::uint32_t>(bytes[1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[2]) << 16) |
                             (static_cast<std::uint32_t>(bytes[3]) << 24);
  return static_cast<double>(std::bit_cast<float>(bits));
}

}  // namespace

int LaneGrid::occupied_cells() const {
  int n = 0;
  for (double o : occupancy) n += o > 0.0 ? 1 : 0;
  return n;
}

int grid_cell(double offset) {
  const double x = (offset + kVisibility) / kGridResolution;
  if (x < 0.0 || x >= kGridCells) return -1;
  return static_cast<int>(std::floor(x));
}

AgentObservation build_observation(const WorldState& world, int agent_id) {
  const VehicleState& self = world.vehicle(agent_id);
  if (!self.active) {
    throw Error("build_observation: vehicle " + std::to_string(agent_id) + " is not active");
  }
  AgentObservation obs;
  obs.priority = self.behavior.b_prio;
  obs.driver_type = self.behavior.b_type;
  obs.v = self.v;
  obs.a = self.a;
  obs.dist_to_merge = world.road.merge_point_s - self.s;
  obs.post_brake = self.post_brake;

  std::array<double, kGridCells> cl_owner;
  std::array<double, kGridCells> ol_owner;
  cl_owner.fill(std::numeric_limits<double>::infinity());
  ol_owner.fill(std::numeric_limits<double>::infinity());

  const double d_self = path_coordinate(self, world.road);
  for (const VehicleState& o : world.vehicles) {
    if (!o.active || o.id == agent_id) continue;
    const double offset = path_coordinate(o, world.road) - d_self;
    const double rel_v = o.v - self.v;
    if (share_path(self, o, world.road)) {
      rasterize(obs.obs_cl, cl_owner, offset, rel_v);
    } else {
      rasterize(obs.obs_ol, ol_owner, offset, rel_v);
    }
  }
  return obs;
}

void write_observation_dump(std::ostream& out, const AgentObservation& obs) {
  put_f32(out, obs.priority);
  put_f32(out, obs.driver_type);
  put_f32(out, obs.v);
  put_f32(out, obs.a);
  put_f32(out, obs.dist_to_merge);
  put_f32(out, obs.post_brake ? 1.0 : 0.0);
  for (const LaneGrid* g : {&obs.obs_cl, &obs.obs_ol}) {
    for (double x : g->occupancy) put_f32(out, x);
    for (double x : g->rel_speed) put_f32(out, x);
  }
}

AgentObservation read_observation_dump(std::istream& in) {
  AgentObservation obs;
  obs.priority = static_cast<int>(get_f32(in));
  obs.driver_type = get_f32(in);
  obs.v = get_f32(in);
  obs.a = get_f32(in);
  obs.dist_to_merge = get_f32(in);
  obs.post_brake = get_f32(in) != 0.0;
  for (LaneGrid* g : {&obs.obs_cl, &obs.obs_ol}) {
    for (double& x : g->occupancy) x = get_f32(in);
    for (double& x : g->rel_speed) x = get_f32(in);
  }
  return obs;
}

}  // namespace idas
