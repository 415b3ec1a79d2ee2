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

// Actor-critic training: decentralized TD advantage (J1), centralized critic
// with a counterfactual baseline (J2), their weighted combination, and the
// two-stage curriculum.
//
// Gradients returned by grad_J1 / grad_J2 point uphill for the objective;
// loss gradients point uphill for the loss. Updates negate accordingly.

#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "idas/checkpoint.hpp"
#include "idas/rollout.hpp"

namespace idas {

struct TrainConfig {
  double gamma = 0.9;
  double alpha = 0.7;
  std::uint64_t stage1_episodes = 20000;
  std::uint64_t stage2_episodes = 50000;
  std::uint64_t direct_episodes = 70000;
  int stage2_agent_count = 8;
  int stage1_min_robots = 2;
  int stage1_max_robots = 4;
  double lr_policy = 1e-4;
  double lr_critic = 1e-3;
  double tau = 0.01;
  double entropy_coef = 0.01;
  std::uint64_t seed = 0;
  int max_steps = 600;
  std::uint64_t checkpoint_every = 0;  // 0: only the final checkpoint
  int workers = 1;

  // Scenario sampling.
  double entry_window_s = 10.0;
  double min_initial_v = 8.0;
  double max_initial_v = 20.0;
  double preplace_fraction = 0.5;
  double max_initial_s = 100.0;
  double equal_priority_prob = 0.1;
  /// Stage 1 places the learner at a uniform position in [0, this] at t = 0.
  double learner_max_initial_s = 200.0;

  void validate() const;
};

/// All networks, targets and optimizer moments of one training run.
struct Learner {
  TrunkArch trunk;
  QArch q_arch;
  PolicyNet pi;
  ValueNet v;
  ValueNet v_target;
  bool has_q = false;  // Q, its target and the target policy exist
  QNet q;
  QNet q_target;
  PolicyNet pi_target;
  nn::OptimizerState pi_opt, v_opt, q_opt;
  std::uint32_t stage = 1;
  std::uint64_t stage1_episodes = 0;
  std::uint64_t stage2_episodes = 0;
  std::uint64_t updates = 0;

  /// Fresh policy and decentralized critic (target = copy).
  static Learner create(std::uint64_t seed, const TrunkArch& trunk = {},
                        const QArch& q_arch = {});
  /// Adds a fresh centralized critic and the target policy.
  void add_centralized(std::uint64_t seed);

  Checkpoint to_checkpoint() const;
  /// Default architectures only.
  static Learner from_checkpoint(const Checkpoint& ckpt);
};

// ---- objectives ----

/// r + gamma V(o') - V(o), with V(o') = 0 on terminal steps.
double advantage_decentralized(double r, double v_now, double v_next, double gamma,
                               bool terminal);

/// sum_{a'} pi(a') Q(s, (a^{-n}, a')), over actions with non-zero
/// probability. Only the first layer changes across substitutions, so its
/// pre-activation is computed once.
double counterfactual_baseline(const QNet& q, const GlobalState& state,
                               const SlotActions& joint, std::size_t slot,
                               const std::array<double, kNumActions>& pi);

struct LossResult {
  double loss = 0.0;
  nn::Gradients grads;
};

/// Sum over agent-steps of A log pi(a) + beta H(pi), A held constant.
double surrogate_J1(const Batch& batch, const PolicyNet& pi, const ValueNet& v, double gamma,
                    double entropy_coef);
nn::Gradients grad_J1(const Batch& batch, const PolicyNet& pi, const ValueNet& v, double gamma,
                      double entropy_coef);

/// 1/2 sum (r + gamma V_target(o') - V(o))^2.
LossResult loss_V(const Batch& batch, const ValueNet& v, const ValueNet& v_target, double gamma);

/// Q(s, a) - counterfactual baseline for every agent-step, in batch order.
std::vector<double> advantages_J2(const Batch& batch, const PolicyNet& pi, const QNet& q);
/// Sum over agent-steps of A log pi(a) + beta H(pi) with the advantages
/// frozen (as returned by advantages_J2 at the snapshot being differentiated).
double surrogate_J2(const Batch& batch, const PolicyNet& pi,
                    const std::vector<double>& advantages, double entropy_coef);
nn::Gradients grad_J2(const Batch& batch, const PolicyNet& pi, const QNet& q,
                      double entropy_coef);

/// 1/2 sum (R + gamma Q_target(s', a') - Q(s, a))^2 with a' drawn from the
/// target policy (seeded) at s'.
LossResult loss_Q(const Batch& batch, const QNet& q, const QNet& q_target,
                  const PolicyNet& pi_target, double gamma, std::uint64_t seed);

struct UpdateStats {
  double loss_v = 0.0;
  double loss_q = 0.0;
  double entropy = 0.0;  // mean policy entropy over agent-steps
  std::size_t samples = 0;
};

/// One update from one batch. With alpha = 1 the centralized critic is left
/// untouched; otherwise the learner must have one. All gradients come from
/// the same parameter snapshot; targets are soft-updated afterwards.
UpdateStats combined_update(const Batch& batch, Learner& learner, const TrainConfig& config,
                            std::uint64_t seed);

/// Plain-gradient variant used to check linearity of the combination.
UpdateStats combined_update(const Batch& batch, Learner& learner, const TrainConfig& config,
                            std::uint64_t seed, const nn::OptimizerConfig& policy_opt,
                            const nn::OptimizerConfig& critic_opt);

// ---- curriculum ----

struct EpisodeLog {
  std::uint64_t episode = 0;
  int stage = 1;
  int steps = 0;
  std::map<int, double> returns;  // policy vehicles only
  std::map<int, bool> success;
  double mean_return = 0.0;
  double success_rate = 0.0;
  UpdateStats stats;
  EndReason end_reason = EndReason::kAllDone;
};

struct TrainHooks {
  std::function<void(const EpisodeLog&)> on_episode;
  std::function<void(const Learner&)> on_checkpoint;
  /// Called with the pre-update learner before a NonFiniteError propagates.
  std::function<void(const Learner&)> on_failure;
};

/// Training scenario for episode `episode` of the given stage.
ScenarioSpec stage1_scenario(const TrainConfig& config, std::uint64_t episode);
ScenarioSpec stage2_scenario(const TrainConfig& config, std::uint64_t episode);

void train_stage1(Learner& learner, const TrainConfig& config, const TrainHooks& hooks = {});
/// Adds the centralized critic if missing, then self-play with the
/// combined objective.
void train_stage2(Learner& learner, const TrainConfig& config, const TrainHooks& hooks = {});
/// Combined objective from scratch, without the single-learner stage.
void train_direct(Learner& learner, const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace idas
