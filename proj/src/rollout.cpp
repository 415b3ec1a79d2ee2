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

#include "idas/rollout.hpp"

#include <algorithm>

#include "idas/baselines.hpp"
#include "idas/observation.hpp"

namespace idas {

namespace {

ObsPtr observe(const WorldState& world, int id) {
  return std::make_shared<const EncodedObs>(encode_observation(build_observation(world, id)));
}

int uniform_permitted(const ActionMask& mask, Rng& rng) {
  const int n = mask.count();
  int pick = static_cast<int>(uniform_int(rng, 0, n - 1));
  for (int i = 0; i < kNumActions; ++i) {
    if (!mask.permitted[static_cast<std::size_t>(i)]) continue;
    if (pick-- == 0) return i;
  }
  throw Error("uniform_permitted: empty mask");
}

SlotActions empty_slots(std::size_t n) { return SlotActions(n, -1); }

std::string events_for(const WorldState& next, const RewardBreakdown& rewards, int id) {
  std::string out;
  auto add = [&out](std::string_view e) {
    if (!out.empty()) out += '|';
    out += e;
  };
  const StepEvents& ev = next.events;
  if (std::ranges::find(ev.hard_brakes, id) != ev.hard_brakes.end()) add("hard_brake");
  if (std::ranges::find(ev.finishes, id) != ev.finishes.end()) add("finish");
  for (const auto& [i, j] : ev.collisions) {
    if (i == id || j == id) add("collide");
  }
  if (auto it = rewards.components.find(id); it != rewards.components.end()) {
    for (const auto& c : it->second) {
      if (c.tag == RewardTag::kImpede) add("impede");
    }
  }
  return out;
}

}  // namespace

std::string_view end_reason_name(EndReason r) {
  switch (r) {
    case EndReason::kAllDone: return "all_done";
    case EndReason::kPolicyCollision: return "policy_collision";
    case EndReason::kStepCap: return "step_cap";
  }
  return "?";
}

const PolicyNet* DriverSet::policy_for(int id) const {
  if (auto it = per_vehicle.find(id); it != per_vehicle.end()) return it->second;
  return policy;
}

PolicyMode DriverSet::mode_for(int id) const {
  if (auto it = mode_per_vehicle.find(id); it != mode_per_vehicle.end()) return it->second;
  return mode;
}

bool EpisodeResult::succeeded(int id) const {
  const VehicleState& v = final_world.vehicle(id);
  return v.finished && !v.collided;
}

bool EpisodeResult::perfect() const {
  for (const VehicleState& v : final_world.vehicles) {
    if (!v.finished || v.collided) return false;
  }
  for (const auto& [id, comps] : components) {
    for (const auto& c : comps) {
      if (c.value < 0.0) return false;
    }
  }
  return true;
}

int sample_action(const std::array<double, kNumActions>& probs, Rng& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  int last = -1;
  for (int i = 0; i < kNumActions; ++i) {
    const double p = probs[static_cast<std::size_t>(i)];
    if (p <= 0.0) continue;
    cum += p;
    last = i;
    if (u < cum) return i;
  }
  if (last < 0) throw Error("sample_action: no action has positive probability");
  return last;
}

int greedy_action(const std::array<double, kNumActions>& probs) {
  return static_cast<int>(std::distance(probs.begin(), std::ranges::max_element(probs)));
}

EpisodeResult rollout_episode(const ScenarioSpec& spec, const DriverSet& drivers, Rng& rng,
                              const RolloutOptions& options) {
  EpisodeResult result;
  WorldState world = make_world(spec);
  std::map<int, FsmState> fsm;
  const std::size_t slots = options.q_slots;

  auto is_policy = [&](const VehicleState& v) { return v.controller == Controller::kPolicy; };
  auto slot_ok = [&](int id) { return static_cast<std::size_t>(id) < slots; };

  // Deterministic controllers' choice, without advancing any state.
  auto fixed_action = [&](const WorldState& w, const VehicleState& v) -> int {
    switch (v.controller) {
      case Controller::kRobot: return index_of(robot_action(w, v.id));
      case Controller::kIdm: return index_of(idm_action(w, v.id));
      case Controller::kFsmIdm: {
        auto it = fsm.find(v.id);
        return index_of(fsm_idm_action(w, v.id, it == fsm.end() ? FsmState{} : it->second).first);
      }
      default: return -1;
    }
  };

  for (;;) {
    bool policy_left = false;
    bool any_left = false;
    for (const VehicleState& v : world.vehicles) {
      if (v.done()) continue;
      any_left = true;
      if (is_policy(v)) policy_left = true;
    }
    if (!(options.training ? policy_left : any_left)) {
      result.end_reason = EndReason::kAllDone;
      break;
    }
    if (result.steps >= options.max_steps) {
      result.end_reason = EndReason::kStepCap;
      break;
    }

    JointAction joint;
    std::map<int, ActionMask> masks;
    std::map<int, ObsPtr> obs;
    for (const VehicleState& v : world.vehicles) {
      if (!v.active) continue;
      const ActionMask mask = compute_mask(world, v.id);
      if (!mask.any()) throw ContractViolation("combined mask is empty");
      int a = 0;
      switch (v.controller) {
        case Controller::kPolicy: {
          const PolicyNet* net = drivers.policy_for(v.id);
          if (net == nullptr) throw Error("no policy network for vehicle " + std::to_string(v.id));
          ObsPtr o = observe(world, v.id);
          const auto probs = policy_forward(*net, *o, mask);
          a = drivers.mode_for(v.id) == PolicyMode::kGreedy ? greedy_action(probs)
                                                             : sample_action(probs, rng);
          obs[v.id] = std::move(o);
          break;
        }
        case Controller::kRobot: a = index_of(robot_action(world, v.id)); break;
        case Controller::kIdm: a = index_of(idm_action(world, v.id)); break;
        case Controller::kFsmIdm: {
          auto [act, state] = fsm_idm_action(world, v.id, fsm[v.id]);
          fsm[v.id] = state;
          a = index_of(act);
          break;
        }
        case Controller::kRandom: a = uniform_permitted(mask, rng); break;
      }
      if (!mask.permitted[static_cast<std::size_t>(a)]) {
        throw ContractViolation("vehicle " + std::to_string(v.id) + " chose forbidden action " +
                                std::string(action_name(action_from_index(a))));
      }
      joint[v.id] = action_from_index(a);
      masks[v.id] = mask;
    }

    // Link the previous transition to this state.
    if (options.record_transitions && !result.transitions.empty()) {
      TransitionRecord& prev = result.transitions.back();
      for (AgentStep& s : prev.agents) {
        if (!s.terminal) s.next_obs = obs.at(s.id);
      }
      prev.next_fixed_actions = empty_slots(slots);
      for (const auto& [id, o] : obs) {
        if (slot_ok(id)) prev.next_agents.push_back({static_cast<std::size_t>(id), o, masks.at(id)});
      }
      for (const auto& [id, a] : joint) {
        if (slot_ok(id) && !is_policy(world.vehicle(id))) {
          prev.next_fixed_actions[static_cast<std::size_t>(id)] = index_of(a);
        }
      }
    }

    WorldState next = step_world(world, joint);
    const BrakeAttribution attribution = attribute_hard_brakes(world, next.events);
    const RewardBreakdown rewards = step_rewards(next, next.events, attribution);

    for (const auto& [id, r] : rewards.per_agent) result.total_reward[id] += r;
    for (const auto& [id, comps] : rewards.components) {
      auto& dst = result.components[id];
      dst.insert(dst.end(), comps.begin(), comps.end());
    }
    result.flow_events += rewards.flow_events;
    result.joint_return += rewards.joint;

    auto reward_of = [&rewards](int id) {
      auto it = rewards.per_agent.find(id);
      return it == rewards.per_agent.end() ? 0.0 : it->second;
    };

    if (options.record_trajectory) {
      for (const auto& [id, a] : joint) {
        const VehicleState& v = world.vehicle(id);
        result.trajectory.push_back({world.t, id, v.lane, v.s, v.v, v.a, a, masks.at(id),
                                     v.behavior.b_prio, v.behavior.b_type,
                                     events_for(next, rewards, id), reward_of(id)});
      }
    }

    bool policy_collision = false;
    for (const auto& [i, j] : next.events.collisions) {
      if (is_policy(next.vehicle(i)) || is_policy(next.vehicle(j))) policy_collision = true;
    }

    if (options.record_transitions) {
      TransitionRecord rec;
      rec.t = world.t;
      rec.state = encode_global_state(world, slots);
      rec.joint_action = empty_slots(slots);
      for (const auto& [id, a] : joint) {
        if (slot_ok(id)) rec.joint_action[static_cast<std::size_t>(id)] = index_of(a);
      }
      for (const auto& [id, o] : obs) {
        AgentStep s;
        s.id = id;
        s.slot = static_cast<std::size_t>(id);
        s.obs = o;
        s.behavior = world.vehicle(id).behavior;
        s.mask = masks.at(id);
        s.action = index_of(joint.at(id));
        s.reward = reward_of(id);
        s.terminal = next.vehicle(id).done();
        rec.agents.push_back(std::move(s));
      }
      rec.joint_reward = rewards.joint;
      rec.next_state = encode_global_state(next, slots);
      result.transitions.push_back(std::move(rec));
    }

    world = std::move(next);
    ++result.steps;
    if (options.training && policy_collision) {
      result.end_reason = EndReason::kPolicyCollision;
      break;
    }
  }

  if (options.record_transitions && !result.transitions.empty()) {
    TransitionRecord& last = result.transitions.back();
    if (result.end_reason == EndReason::kStepCap) {
      // Truncated: keep bootstrapping from the state the episode stopped in.
      last.next_fixed_actions = empty_slots(slots);
      for (const VehicleState& v : world.vehicles) {
        if (!v.active || !slot_ok(v.id)) continue;
        if (is_policy(v)) {
          last.next_agents.push_back(
              {static_cast<std::size_t>(v.id), observe(world, v.id), compute_mask(world, v.id)});
        } else {
          last.next_fixed_actions[static_cast<std::size_t>(v.id)] = fixed_action(world, v);
        }
      }
      for (AgentStep& s : last.agents) {
        if (s.terminal) continue;
        for (const NextAgent& n : last.next_agents) {
          if (n.slot == s.slot) s.next_obs = n.obs;
        }
        if (!s.next_obs) s.next_obs = observe(world, s.id);
      }
    } else {
      last.terminal = true;
      last.next_agents.clear();
      // Agents cut off by another vehicle's collision still bootstrap their
      // own value from where they stopped.
      for (AgentStep& s : last.agents) {
        if (!s.terminal) s.next_obs = observe(world, s.id);
      }
    }
  }
  result.final_world = std::move(world);
  return result;
}

}  // namespace idas
