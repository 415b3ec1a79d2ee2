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

// Small builders shared by the unit tests.

#pragma once

#include <vector>

#include "idas/sim.hpp"

namespace idas::testing {

inline VehicleState car(int id, int lane, double s, double v, double a = 0.0,
                        Controller c = Controller::kPolicy) {
  VehicleState x;
  x.id = id;
  x.lane = lane;
  x.s = s;
  x.v = v;
  x.a = a;
  x.controller = c;
  x.active = true;
  x.behavior.b_prio = lane == 0 || s >= kMergePoint ? 1 : 0;
  return x;
}

/// World with the given active vehicles; ids must be 0..n-1 in order.
inline WorldState world_of(std::vector<VehicleState> vehicles, RoadNetwork road = {}) {
  WorldState w;
  w.road = road;
  w.vehicles = std::move(vehicles);
  return w;
}

}  // namespace idas::testing
