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

#include <sstream>

#include "idas/observation.hpp"
#include "test_util.hpp"

namespace idas {
namespace {

using testing::car;
using testing::world_of;

std::vector<int> occupied(const LaneGrid& g) {
  std::vector<int> cells;
  for (int k = 0; k < kGridCells; ++k) {
    if (g.occupancy[static_cast<std::size_t>(k)] > 0.0) cells.push_back(k);
  }
  return cells;
}

std::vector<int> span_cells(int first, int n) {
  std::vector<int> v;
  for (int k = first; k < first + n; ++k) v.push_back(k);
  return v;
}

TEST(Observation, LoneAgent) {
  const auto w = world_of({car(0, 0, 30, 12, 0.3)});
  const AgentObservation o = build_observation(w, 0);
  EXPECT_EQ(o.obs_cl.occupied_cells(), 0);
  EXPECT_EQ(o.obs_ol.occupied_cells(), 0);
  EXPECT_EQ(o.priority, 1);
  EXPECT_DOUBLE_EQ(o.dist_to_merge, 120.0);
  EXPECT_DOUBLE_EQ(o.v, 12.0);
  EXPECT_DOUBLE_EQ(o.a, 0.3);
}

TEST(Observation, OtherLaneAligned) {
  const auto w = world_of({car(0, 0, 100, 12), car(1, 1, 100, 12)});
  const AgentObservation o = build_observation(w, 0);
  EXPECT_EQ(occupied(o.obs_ol), span_cells(196, 8));
  for (int k = 196; k < 204; ++k) EXPECT_EQ(o.obs_ol.rel_speed[static_cast<std::size_t>(k)], 0.0);
  EXPECT_EQ(o.obs_cl.occupied_cells(), 0);
}

TEST(Observation, OwnLaneAhead) {
  // Offset +10 m puts the center at cell 200 + 10 / 0.5 = 220; the vehicle
  // covers the 8 cells around it.
  const auto w = world_of({car(0, 0, 100, 12), car(1, 0, 110, 14)});
  const AgentObservation o = build_observation(w, 0);
  EXPECT_EQ(grid_cell(10.0), 220);
  EXPECT_EQ(occupied(o.obs_cl), span_cells(216, 8));
  for (int k = 216; k < 224; ++k) {
    EXPECT_DOUBLE_EQ(o.obs_cl.rel_speed[static_cast<std::size_t>(k)], 2.0);
  }
}

TEST(Observation, VisibilityAndClipping) {
  EXPECT_EQ(grid_cell(-100.0), 0);
  EXPECT_EQ(grid_cell(99.9), 399);
  EXPECT_EQ(grid_cell(100.0), -1);
  EXPECT_EQ(grid_cell(-100.5), -1);
  const auto w = world_of({car(0, 0, 20, 10), car(1, 0, 121, 10), car(2, 0, 118, 10)});
  const AgentObservation o = build_observation(w, 0);
  // The vehicle at +101 m is invisible; the one at +98 m is clipped at the edge.
  EXPECT_EQ(occupied(o.obs_cl), span_cells(392, 8));
}

TEST(Observation, SharedSegmentUsesCurrentPath) {
  // After the merge both vehicles are on one path regardless of lane.
  const auto w = world_of({car(0, 0, 160, 10), car(1, 1, 170, 10)});
  const AgentObservation o = build_observation(w, 0);
  EXPECT_EQ(o.obs_ol.occupied_cells(), 0);
  EXPECT_EQ(o.obs_cl.occupied_cells(), 8);
}

TEST(Observation, InactiveAgentRejected) {
  auto w = world_of({car(0, 0, 10, 10)});
  w.vehicle(0).active = false;
  EXPECT_THROW(build_observation(w, 0), Error);
}

TEST(Observation, DumpRoundTrip) {
  const auto w = world_of({car(0, 0, 100, 12.5, -0.5), car(1, 0, 110, 14), car(2, 1, 95, 9)});
  const AgentObservation o = build_observation(w, 0);
  std::stringstream ss;
  write_observation_dump(ss, o);
  EXPECT_EQ(ss.str().size(), 4u * (6 + 4 * kGridCells));
  EXPECT_EQ(read_observation_dump(ss), o);
}

TEST(Observation, TruncatedDump) {
  std::stringstream ss("abc");
  EXPECT_THROW(read_observation_dump(ss), Error);
}

}  // namespace
}  // namespace idas
