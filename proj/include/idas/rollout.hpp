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

// Episode runner shared by training, evaluation and the CLI. Every vehicle
// acts through the combined mask; policy-controlled vehicles can be
// recorded as on-policy transitions.

#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "idas/networks.hpp"
#include "idas/rewards.hpp"

namespace idas {

using ObsPtr = std::shared_ptr<const EncodedObs>;

/// One policy agent's part of a transition.
struct AgentStep {
  int id = 0;
  std::size_t slot = 0;
  ObsPtr obs;
  BehaviorParams behavior;
  ActionMask mask;
  int action = 0;
  double reward = 0.0;
  bool terminal = false;  // the agent finished or collided on this step
  ObsPtr next_obs;        // null when terminal
};

/// A policy agent active at the successor state; used to draw the target
/// policy's joint action there.
struct NextAgent {
  std::size_t slot = 0;
  ObsPtr obs;
  ActionMask mask;
};

struct TransitionRecord {
  int t = 0;
  std::vector<AgentStep> agents;
  GlobalState state;
  SlotActions joint_action;
  double joint_reward = 0.0;
  GlobalState next_state;
  bool terminal = false;  // no bootstrapping from the successor state
  std::vector<NextAgent> next_agents;
  /// Actions of non-policy vehicles at the successor state, by slot.
  SlotActions next_fixed_actions;
};

using Batch = std::vector<TransitionRecord>;

enum class PolicyMode { kSample, kGreedy };

/// Which networks drive kPolicy vehicles.
struct DriverSet {
  const PolicyNet* policy = nullptr;
  std::map<int, const PolicyNet*> per_vehicle;  // overrides `policy`
  PolicyMode mode = PolicyMode::kSample;
  std::map<int, PolicyMode> mode_per_vehicle;  // overrides `mode`

  const PolicyNet* policy_for(int id) const;
  PolicyMode mode_for(int id) const;
};

struct RolloutOptions {
  int max_steps = 600;
  /// Training episodes stop at the first collision involving a policy
  /// vehicle and once every policy vehicle is done; otherwise the episode
  /// runs until every vehicle is done.
  bool training = true;
  bool record_transitions = true;
  bool record_trajectory = false;
  std::size_t q_slots = kDefaultSlots;
};

struct TrajectoryRow {
  int t = 0;
  int id = 0;
  int lane = 0;
  double s = 0.0;
  double v = 0.0;
  double a = 0.0;
  ActionId action = ActionId::kKeep;
  ActionMask mask;
  int b_prio = 0;
  double b_type = 0.0;
  std::string events;
  double reward = 0.0;
};

enum class EndReason { kAllDone, kPolicyCollision, kStepCap };

std::string_view end_reason_name(EndReason r);

struct EpisodeResult {
  Batch transitions;
  std::vector<TrajectoryRow> trajectory;
  WorldState final_world;
  std::map<int, double> total_reward;  // undiscounted, every vehicle
  std::map<int, std::vector<RewardComponent>> components;
  int flow_events = 0;
  double joint_return = 0.0;
  int steps = 0;
  EndReason end_reason = EndReason::kAllDone;

  /// Vehicle finished without colliding.
  bool succeeded(int id) const;
  /// Every vehicle finished and none received a negative component.
  bool perfect() const;
};

/// Index of the action drawn from `probs` with one uniform variate.
int sample_action(const std::array<double, kNumActions>& probs, Rng& rng);
/// Highest-probability action; ties go to the lower index.
int greedy_action(const std::array<double, kNumActions>& probs);

EpisodeResult rollout_episode(const ScenarioSpec& spec, const DriverSet& drivers, Rng& rng,
                              const RolloutOptions& options);

}  // namespace idas
