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

#include "idas/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "idas/masking.hpp"

namespace idas {

namespace {

constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "dec2", "dec1", "keep", "acc1", "acc2", "hard_brake", "release_brake"};

constexpr double kEps = 1e-9;

// A scheduled vehicle may enter only where it would not need to brake
// harder than the comfortable deceleration, and neither would its follower.
bool entry_is_free(const WorldState& world, const VehicleState& entering) {
  const double d = entering.s - world.road.merge_point_s;
  if (auto lead = find_leader_at(world, entering.lane, d, entering.id)) {
    const VehicleState& l = world.vehicle(*lead);
    const double gap = path_coordinate(l, world.road) - d - kVehicleLength;
    if (gap < kMinGap) return false;
    const IdmParams p = idm_params_for(entering, world.road);
    if (idm_acceleration(entering.v, l.v, gap, p) < -p.b_comf) return false;
  }
  if (auto follow = find_follower_at(world, entering.lane, d, entering.id)) {
    const VehicleState& f = world.vehicle(*follow);
    const double gap = d - path_coordinate(f, world.road) - kVehicleLength;
    if (gap < kMinGap) return false;
    const IdmParams p = idm_params_for(f, world.road);
    if (idm_acceleration(f.v, entering.v, gap, p) < -p.b_comf) return false;
  }
  // Anything overlapping the entry point on a crossing path also blocks.
  for (const VehicleState& o : world.vehicles) {
    if (!o.active || o.id == entering.id) continue;
    if (share_path(o, entering, world.road) &&
        std::abs(path_coordinate(o, world.road) - d) < kVehicleLength + kMinGap) {
      return false;
    }
  }
  return true;
}

void activate_entries(WorldState& world) {
  const double now = world.time_s();
  for (VehicleState& v : world.vehicles) {
    if (!v.pending() || v.entry_time_s > now + kEps) continue;
    if (world.t > 0 || v.entry_time_s > kEps) {
      if (!entry_is_free(world, v)) continue;
    }
    v.active = true;
    v.entry_step = world.t;
    if (v.s >= world.road.merge_point_s && v.merge_step < 0) v.merge_step = world.t;
  }
}

void update_priority(VehicleState& v, const RoadNetwork& road) {
  if (v.s >= road.merge_point_s) {
    v.behavior.b_prio = road.lane_priority[static_cast<std::size_t>(road.main_lane())];
  } else {
    v.behavior.b_prio = road.lane_priority[static_cast<std::size_t>(v.lane)];
  }
}

}  // namespace

std::string_view action_name(ActionId a) {
  return kActionNames.at(static_cast<std::size_t>(index_of(a)));
}

ActionId parse_action(std::string_view name) {
  for (int i = 0; i < kNumActions; ++i) {
    if (kActionNames[static_cast<std::size_t>(i)] == name) return action_from_index(i);
  }
  throw Error("unknown action '" + std::string(name) + "'");
}

std::string_view controller_name(Controller c) {
  switch (c) {
    case Controller::kPolicy: return "policy";
    case Controller::kRobot: return "robot";
    case Controller::kIdm: return "idm";
    case Controller::kFsmIdm: return "fsm_idm";
    case Controller::kRandom: return "random";
  }
  return "?";
}

Controller parse_controller(std::string_view name) {
  if (name == "policy") return Controller::kPolicy;
  if (name == "robot") return Controller::kRobot;
  if (name == "idm") return Controller::kIdm;
  if (name == "fsm_idm") return Controller::kFsmIdm;
  if (name == "random") return Controller::kRandom;
  throw Error("unknown controller '" + std::string(name) + "'");
}

void RoadNetwork::validate() const {
  if (!(merge_point_s > 0.0 && merge_point_s < lane_length_m)) {
    throw Error("road: merge_point_s must lie strictly inside the lane");
  }
  for (std::size_t l = 0; l < 2; ++l) {
    if (!(speed_limit[l] > 0.0)) throw Error("road: speed_limit must be positive");
    if (lane_priority[l] != 0 && lane_priority[l] != 1) {
      throw Error("road: lane_priority must be 0 or 1");
    }
  }
}

bool WorldState::any_active() const {
  return std::any_of(vehicles.begin(), vehicles.end(),
                     [](const VehicleState& v) { return v.active; });
}

RoadNetwork ScenarioSpec::road() const {
  RoadNetwork r;
  r.speed_limit = speed_limit;
  r.lane_priority = lane_priority;
  return r;
}

void ScenarioSpec::validate() const {
  road().validate();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const ScenarioEntry& e = entries[i];
    std::ostringstream where;
    where << "entries[" << i << "]";
    if (e.lane != 0 && e.lane != 1) throw Error(where.str() + ".lane must be 0 or 1");
    if (!(e.entry_time_s >= 0.0)) throw Error(where.str() + ".entry_time_s must be >= 0");
    if (!(e.initial_s >= 0.0 && e.initial_s < kLaneLength)) {
      throw Error(where.str() + ".initial_s must lie in [0, lane length)");
    }
    const double limit = speed_limit[static_cast<std::size_t>(e.lane)];
    if (!(e.initial_v >= 0.0 && e.initial_v <= limit + kEps)) {
      throw Error(where.str() + ".initial_v must lie in [0, lane speed limit]");
    }
    if (!(e.b_type >= -2.0 && e.b_type <= 2.0)) {
      throw Error(where.str() + ".b_type must lie in [-2, 2]");
    }
  }
  // Same-lane gap invariant among vehicles that share an entry time.
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (std::size_t j = i + 1; j < entries.size(); ++j) {
      const ScenarioEntry& a = entries[i];
      const ScenarioEntry& b = entries[j];
      if (a.lane != b.lane || std::abs(a.entry_time_s - b.entry_time_s) > kEps) continue;
      if (std::abs(a.initial_s - b.initial_s) < kMinGap + kVehicleLength - kEps) {
        std::ostringstream msg;
        msg << "gap invariant violated: entries[" << i << "] and entries[" << j
            << "] are closer than " << kMinGap + kVehicleLength << " m on lane " << a.lane;
        throw Error(msg.str());
      }
    }
  }
}

void ScenarioRandomization::validate() const {
  if (min_agents < 1 || max_agents < min_agents) {
    throw Error("randomization: need 1 <= min_agents <= max_agents");
  }
  if (entry_window_s < 0.0) throw Error("randomization: entry_window_s must be >= 0");
  if (min_initial_v < 0.0 || max_initial_v < min_initial_v) {
    throw Error("randomization: need 0 <= min_initial_v <= max_initial_v");
  }
  if (preplace_fraction < 0.0 || preplace_fraction > 1.0) {
    throw Error("randomization: preplace_fraction must lie in [0, 1]");
  }
  if (max_initial_s < 0.0 || max_initial_s >= kLaneLength) {
    throw Error("randomization: max_initial_s must lie in [0, lane length)");
  }
  // Each lane holds at most one vehicle per (gap + length) at a single instant.
  const int capacity = 2 * static_cast<int>(kLaneLength / (kMinGap + kVehicleLength));
  if (max_agents > capacity) {
    throw Error("randomization: max_agents exceeds road capacity of " +
                std::to_string(capacity));
  }
}

double path_coordinate(const VehicleState& vehicle, const RoadNetwork& road) {
  return vehicle.s - road.merge_point_s;
}

bool share_path(const VehicleState& a, const VehicleState& b, const RoadNetwork& road) {
  if (a.lane == b.lane) return true;
  return path_coordinate(a, road) >= 0.0 && path_coordinate(b, road) >= 0.0;
}

double snap_accel(double a) { return std::round(a * 10.0) / 10.0; }

VehicleState apply_action(const VehicleState& vehicle, ActionId action) {
  VehicleState out = vehicle;
  switch (action) {
    case ActionId::kHardBrake:
      out.a = kHardBrakeAccel;
      out.post_brake = true;
      return out;
    case ActionId::kReleaseBrake:
      if (!vehicle.post_brake) {
        throw ContractViolation("release_brake issued without a preceding hard_brake");
      }
      out.a = 0.0;
      out.post_brake = false;
      return out;
    default:
      break;
  }
  const double delta = kDeltaAccel[static_cast<std::size_t>(index_of(action))];
  out.a = std::clamp(snap_accel(vehicle.a + delta), kMinAccel, kMaxAccel);
  out.post_brake = false;
  return out;
}

VehicleState integrate(const VehicleState& vehicle, double dt) {
  VehicleState out = vehicle;
  const double v_end = vehicle.v + vehicle.a * dt;
  if (v_end >= 0.0) {
    out.s = vehicle.s + vehicle.v * dt + 0.5 * vehicle.a * dt * dt;
    out.v = v_end;
  } else {
    // Decelerating through zero: stop at t* = -v / a and stay there.
    const double t_stop = -vehicle.v / vehicle.a;
    out.s = vehicle.s + vehicle.v * t_stop + 0.5 * vehicle.a * t_stop * t_stop;
    out.v = 0.0;
  }
  return out;
}

std::vector<std::pair<int, int>> detect_collisions(const WorldState& world) {
  std::vector<std::pair<int, int>> out;
  const auto& vs = world.vehicles;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (!vs[i].active) continue;
    for (std::size_t j = i + 1; j < vs.size(); ++j) {
      if (!vs[j].active) continue;
      if (!share_path(vs[i], vs[j], world.road)) continue;
      const double gap = std::abs(path_coordinate(vs[i], world.road) -
                                  path_coordinate(vs[j], world.road));
      if (gap < kVehicleLength) out.emplace_back(vs[i].id, vs[j].id);
    }
  }
  return out;
}

std::optional<int> find_leader_at(const WorldState& world, int lane, double d, int exclude_id) {
  std::optional<int> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const VehicleState& o : world.vehicles) {
    if (!o.active || o.id == exclude_id) continue;
    const double od = path_coordinate(o, world.road);
    if (od <= d) continue;
    const bool on_path = (o.lane == lane) || od >= 0.0;
    if (on_path && od < best_d) {
      best_d = od;
      best = o.id;
    }
  }
  return best;
}

std::optional<int> find_follower_at(const WorldState& world, int lane, double d,
                                    int exclude_id) {
  std::optional<int> best;
  double best_d = -std::numeric_limits<double>::infinity();
  for (const VehicleState& o : world.vehicles) {
    if (!o.active || o.id == exclude_id) continue;
    const double od = path_coordinate(o, world.road);
    if (od >= d) continue;
    const bool on_path = (o.lane == lane) || d >= 0.0;
    if (on_path && od > best_d) {
      best_d = od;
      best = o.id;
    }
  }
  return best;
}

std::optional<int> find_leader(const WorldState& world, int id) {
  const VehicleState& self = world.vehicle(id);
  return find_leader_at(world, self.lane, path_coordinate(self, world.road), id);
}

double gap_between(const WorldState& world, int id, int leader_id) {
  return path_coordinate(world.vehicle(leader_id), world.road) -
         path_coordinate(world.vehicle(id), world.road) - kVehicleLength;
}

WorldState make_world(const ScenarioSpec& spec) {
  spec.validate();
  WorldState world;
  world.road = spec.road();
  world.vehicles.reserve(spec.entries.size());
  for (std::size_t i = 0; i < spec.entries.size(); ++i) {
    const ScenarioEntry& e = spec.entries[i];
    VehicleState v;
    v.id = static_cast<int>(i);
    v.lane = e.lane;
    v.s = e.initial_s;
    v.v = e.initial_v;
    v.a = 0.0;
    v.behavior.b_type = e.b_type;
    v.controller = e.controller;
    v.entry_time_s = e.entry_time_s;
    v.initial_s = e.initial_s;
    v.initial_v = e.initial_v;
    update_priority(v, world.road);
    world.vehicles.push_back(v);
  }
  activate_entries(world);
  return world;
}

WorldState step_world(const WorldState& world, const JointAction& joint_action) {
  for (const auto& [id, action] : joint_action) {
    if (id < 0 || static_cast<std::size_t>(id) >= world.vehicles.size()) {
      throw Error("joint action references unknown vehicle " + std::to_string(id));
    }
    if (!world.vehicle(id).active) {
      throw Error("joint action for inactive vehicle " + std::to_string(id));
    }
  }
  for (const VehicleState& v : world.vehicles) {
    if (v.active && !joint_action.contains(v.id)) {
      throw Error("missing action for active vehicle " + std::to_string(v.id));
    }
  }

  WorldState next = world;
  next.events = StepEvents{};
  StepEvents& ev = next.events;

  // Every vehicle moves from the pre-step state.
  for (VehicleState& v : next.vehicles) {
    if (!v.active) continue;
    const ActionId action = joint_action.at(v.id);
    if (action == ActionId::kHardBrake) {
      ev.hard_brakes.push_back(v.id);
      if (std::abs(path_coordinate(v, world.road)) <= world.road.merging_zone_radius_m) {
        ev.hard_brakes_in_zone.push_back(v.id);
      }
    }
    v = integrate(apply_action(v, action), world.dt);
  }
  next.t = world.t + 1;

  for (VehicleState& v : next.vehicles) {
    if (!v.active) continue;
    if (v.merge_step < 0 && v.s >= world.road.merge_point_s) v.merge_step = next.t;
    update_priority(v, world.road);
    if (v.s >= world.road.lane_length_m) {
      v.finished = true;
      v.active = false;
      v.finish_step = next.t;
      ev.finishes.push_back(v.id);
    }
  }

  ev.collisions = detect_collisions(next);
  for (const auto& [i, j] : ev.collisions) {
    for (int id : {i, j}) {
      VehicleState& v = next.vehicle(id);
      v.collided = true;
      v.active = false;
    }
  }

  activate_entries(next);
  return next;
}

bool placement_compatible(const ScenarioEntry& e, const std::vector<ScenarioEntry>& placed,
                          const RoadNetwork& road) {
  for (const ScenarioEntry& o : placed) {
    const bool shared = o.initial_s >= road.merge_point_s && e.initial_s >= road.merge_point_s;
    if (o.lane != e.lane && !shared) continue;
    const double gap = std::abs(o.initial_s - e.initial_s) - kVehicleLength;
    if (gap < kMinGap) return false;
    // The follower must not need more than comfortable braking.
    const bool e_leads = e.initial_s > o.initial_s;
    const ScenarioEntry& lead = e_leads ? e : o;
    const ScenarioEntry& follow = e_leads ? o : e;
    VehicleState fv;
    fv.lane = follow.lane;
    fv.s = follow.initial_s;
    const IdmParams p = idm_params_for(fv, road);
    if (idm_acceleration(follow.initial_v, lead.initial_v, gap, p) < -p.b_comf) return false;
  }
  return true;
}

ScenarioSpec generate_scenario(std::uint64_t seed, const ScenarioRandomization& config) {
  config.validate();
  Rng rng(seed);
  ScenarioSpec spec;
  spec.seed = seed;
  if (uniform01(rng) < config.equal_priority_prob) {
    spec.lane_priority = {1, 1};
    spec.speed_limit = {kMainLaneSpeedLimit, kMainLaneSpeedLimit};
  } else {
    spec.lane_priority = {1, 0};
    spec.speed_limit = {kMainLaneSpeedLimit, kMergeLaneSpeedLimit};
  }
  const RoadNetwork road = spec.road();
  const int n = static_cast<int>(uniform_int(rng, config.min_agents, config.max_agents));

  // Pre-placed vehicles are drawn first so they can be checked against each
  // other; scheduled entries start at s = 0 and rely on entry gating.
  std::vector<ScenarioEntry> placed;
  std::vector<ScenarioEntry> scheduled;
  constexpr int kMaxTries = 200;
  // Scheduled entries arrive in [dt, window]; same-lane entries never share
  // an arrival instant.
  auto draw_entry_time = [&](int lane) {
    const double lo = std::min(kStepSeconds, config.entry_window_s);
    for (int attempt = 0; attempt < kMaxTries; ++attempt) {
      const double t = uniform(rng, lo, config.entry_window_s);
      const bool clash = std::ranges::any_of(scheduled, [&](const ScenarioEntry& o) {
        return o.lane == lane && std::abs(o.entry_time_s - t) <= kEps;
      });
      if (!clash) return t;
    }
    throw Error("scenario generation infeasible: entry window too short for distinct arrivals");
  };
  for (int k = 0; k < n; ++k) {
    ScenarioEntry e;
    e.lane = static_cast<int>(uniform_int(rng, 0, 1));
    e.b_type = uniform(rng, -2.0, 2.0);
    e.controller = config.controller;
    const double limit = spec.speed_limit[static_cast<std::size_t>(e.lane)];
    const double v_hi = std::min(config.max_initial_v, limit);
    const double v_lo = std::min(config.min_initial_v, v_hi);
    const bool preplace = uniform01(rng) < config.preplace_fraction;
    if (!preplace && config.entry_window_s > 0.0) {
      e.entry_time_s = draw_entry_time(e.lane);
      e.initial_s = 0.0;
      e.initial_v = uniform(rng, v_lo, v_hi);
      scheduled.push_back(e);
      continue;
    }
    bool ok = false;
    for (int attempt = 0; attempt < kMaxTries && !ok; ++attempt) {
      e.entry_time_s = 0.0;
      e.initial_s = uniform(rng, 0.0, config.max_initial_s);
      e.initial_v = uniform(rng, v_lo, v_hi);
      ok = placement_compatible(e, placed, road);
    }
    if (!ok && config.entry_window_s > 0.0) {
      // No room at t = 0: the vehicle joins the scheduled entries instead.
      e.entry_time_s = draw_entry_time(e.lane);
      e.initial_s = 0.0;
      scheduled.push_back(e);
      continue;
    }
    if (!ok) {
      throw Error("scenario generation infeasible: could not place " + std::to_string(n) +
                  " vehicles with the required gaps");
    }
    placed.push_back(e);
  }
  spec.entries = std::move(placed);
  spec.entries.insert(spec.entries.end(), scheduled.begin(), scheduled.end());
  spec.validate();
  return spec;
}

}  // namespace idas
