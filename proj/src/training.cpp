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

#include "idas/training.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <unordered_map>

namespace idas {

namespace {

constexpr const char* kTargetPrefix = "target.";

TrunkArch value_arch(TrunkArch arch) {
  arch.outputs = 1;
  return arch;
}

void append_optimizer(Checkpoint& ckpt, const nn::OptimizerState& opt, const nn::ParamSet& params,
                      const std::string& name) {
  if (opt.m.size() == 0) {
    const nn::ParamSet zeros = params.zeros_like();
    ckpt.append(zeros, "adam.m.");
    ckpt.append(zeros, "adam.v.");
  } else {
    ckpt.append(opt.m, "adam.m.");
    ckpt.append(opt.v, "adam.v.");
  }
  nn::ParamBlock step{"adam.step." + name, nn::Tensor({1})};
  step.value.data[0] = static_cast<double>(opt.step);
  ckpt.blocks.push_back(std::move(step));
}

nn::OptimizerState extract_optimizer(const Checkpoint& ckpt, const nn::ParamSet& params,
                                     const std::string& name) {
  nn::OptimizerState opt = nn::OptimizerState::for_params(params);
  ckpt.extract(opt.m, "adam.m.");
  ckpt.extract(opt.v, "adam.v.");
  opt.step = static_cast<std::uint64_t>(ckpt.block("adam.step." + name).data.at(0));
  return opt;
}

double entropy_of(const std::array<double, kNumActions>& p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

// Flattened view of every agent-step in a batch.
struct StepRef {
  const TransitionRecord* rec;
  const AgentStep* step;
};

std::vector<StepRef> flatten(const Batch& batch) {
  std::vector<StepRef> out;
  for (const auto& rec : batch) {
    for (const auto& s : rec.agents) out.push_back({&rec, &s});
  }
  return out;
}

void audit_masks(const Batch& batch) {
  for (const auto& rec : batch) {
    for (const auto& s : rec.agents) {
      if (!s.mask.permitted.at(static_cast<std::size_t>(s.action))) {
        throw ContractViolation("recorded action " + std::to_string(s.action) + " of agent " +
                                std::to_string(s.id) + " at t=" + std::to_string(rec.t) +
                                " is not permitted by its mask");
      }
    }
  }
}

struct ValuePass {
  std::vector<double> advantage;  // TD advantage per agent-step, online V
  double loss = 0.0;
  nn::Gradients grads;
};

// TD advantages against the online critic and the target-bootstrapped value
// loss, in one sweep over the batch.
ValuePass value_pass(const Batch& batch, const ValueNet& v, const ValueNet* v_target,
                     double gamma, bool want_grads) {
  const std::vector<StepRef> steps = flatten(batch);
  ValuePass out;
  if (want_grads) out.grads = v.params().zeros_like();
  std::vector<TrunkCache> caches(steps.size());
  std::vector<double> v_now(steps.size());
  std::unordered_map<const EncodedObs*, double> online;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    v_now[k] = v.forward(*steps[k].step->obs, caches[k])[0];
    online[steps[k].step->obs.get()] = v_now[k];
  }
  out.advantage.resize(steps.size());
  TrunkCache scratch;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const AgentStep& s = *steps[k].step;
    double v_next = 0.0;
    if (!s.terminal) {
      if (!s.next_obs) throw Error("non-terminal agent-step without a successor observation");
      auto it = online.find(s.next_obs.get());
      v_next = it != online.end() ? it->second : v.forward(*s.next_obs, scratch)[0];
    }
    out.advantage[k] = advantage_decentralized(s.reward, v_now[k], v_next, gamma, s.terminal);
    if (v_target == nullptr) continue;
    const double boot = s.terminal ? 0.0 : v_target->forward(*s.next_obs, scratch)[0];
    const double delta = v_now[k] - (s.reward + gamma * boot);
    out.loss += 0.5 * delta * delta;
    if (want_grads) {
      const double d[1] = {delta};
      v.backward(*s.obs, caches[k], d, out.grads);
    }
  }
  return out;
}

struct PolicyPass {
  double surrogate = 0.0;
  double entropy = 0.0;
  nn::Gradients grads;
};

// Sum over agent-steps of w log pi(a) + beta H, where
// w = c1 * a1[k] + c2 * (Q(s,a) - counterfactual baseline).
PolicyPass policy_pass(const Batch& batch, const PolicyNet& pi, double beta,
                       const std::vector<double>& a1, double c1, const QNet* q, double c2,
                       bool want_grads) {
  PolicyPass out;
  if (want_grads) out.grads = pi.params().zeros_like();
  TrunkCache cache;
  std::size_t k = 0;
  for (const auto& rec : batch) {
    for (const auto& s : rec.agents) {
      const auto logits = pi.forward(*s.obs, cache);
      const auto p = masked_softmax(logits, s.mask);
      double w = c1 != 0.0 ? c1 * a1.at(k) : 0.0;
      if (q != nullptr && c2 != 0.0) {
        const auto qv = q->action_values(rec.state, rec.joint_action, s.slot);
        double baseline = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (p[i] > 0.0) baseline += p[i] * qv[i];
        }
        w += c2 * (qv[static_cast<std::size_t>(s.action)] - baseline);
      }
      const double h = entropy_of(p);
      out.entropy += h;
      out.surrogate += w * std::log(p[static_cast<std::size_t>(s.action)]) + beta * h;
      if (want_grads) {
        std::array<double, kNumActions> dlogits{};
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (!s.mask.permitted[i] || !(p[i] > 0.0)) continue;
          const double onehot = static_cast<int>(i) == s.action ? 1.0 : 0.0;
          dlogits[i] = w * (onehot - p[i]) - beta * p[i] * (std::log(p[i]) + h);
        }
        pi.backward(*s.obs, cache, dlogits, out.grads);
      }
      ++k;
    }
  }
  return out;
}

LossResult q_pass(const Batch& batch, const QNet& q, const QNet& q_target,
                  const PolicyNet& pi_target, double gamma, std::uint64_t seed, bool want_grads) {
  LossResult out;
  if (want_grads) out.grads = q.params().zeros_like();
  Rng rng(seed);
  QCache cache;
  for (const auto& rec : batch) {
    double y = rec.joint_reward;
    if (!rec.terminal) {
      SlotActions next = rec.next_fixed_actions;
      if (next.empty()) next.assign(q.arch().slots, -1);
      for (const NextAgent& n : rec.next_agents) {
        next.at(n.slot) = sample_action(policy_forward(pi_target, *n.obs, n.mask), rng);
      }
      y += gamma * q_forward(q_target, rec.next_state, next);
    }
    const double pred = q.forward(q.make_input(rec.state, rec.joint_action), cache);
    const double delta = pred - y;
    out.loss += 0.5 * delta * delta;
    if (want_grads) q.backward(cache, delta, out.grads);
  }
  return out;
}

}  // namespace

// ---- config ----

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("config: gamma must lie in [0, 1)");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("config: alpha must lie in [0, 1]");
  if (stage2_agent_count < 1 || static_cast<std::size_t>(stage2_agent_count) > kDefaultSlots) {
    throw Error("config: stage2_agent_count must lie in [1, " + std::to_string(kDefaultSlots) +
                "]");
  }
  if (stage1_min_robots < 0 || stage1_max_robots < stage1_min_robots ||
      static_cast<std::size_t>(stage1_max_robots) + 1 > kDefaultSlots) {
    throw Error("config: need 0 <= stage1_min_robots <= stage1_max_robots <= " +
                std::to_string(kDefaultSlots - 1));
  }
  if (!(lr_policy > 0.0) || !(lr_critic > 0.0)) throw Error("config: learning rates must be > 0");
  if (!(tau > 0.0 && tau <= 1.0)) throw Error("config: tau must lie in (0, 1]");
  if (!(entropy_coef >= 0.0)) throw Error("config: entropy_coef must be >= 0");
  if (max_steps < 1) throw Error("config: max_steps must be >= 1");
  if (workers < 1) throw Error("config: workers must be >= 1");
  if (!(learner_max_initial_s >= 0.0 && learner_max_initial_s < kLaneLength)) {
    throw Error("config: learner_max_initial_s must lie in [0, lane length)");
  }
  if (!(equal_priority_prob >= 0.0 && equal_priority_prob <= 1.0)) {
    throw Error("config: equal_priority_prob must lie in [0, 1]");
  }
  ScenarioRandomization r;
  r.entry_window_s = entry_window_s;
  r.min_initial_v = min_initial_v;
  r.max_initial_v = max_initial_v;
  r.preplace_fraction = preplace_fraction;
  r.max_initial_s = max_initial_s;
  r.validate();
}

// ---- learner ----

Learner Learner::create(std::uint64_t seed, const TrunkArch& trunk, const QArch& q_arch) {
  Learner l;
  l.trunk = trunk;
  l.trunk.outputs = kNumActions;
  l.q_arch = q_arch;
  Rng rng(mix_seed(seed, 101));
  l.pi = PolicyNet("pi", l.trunk, rng);
  l.v = ValueNet("v", value_arch(l.trunk), rng);
  l.v_target = l.v;
  return l;
}

void Learner::add_centralized(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 202));
  q = QNet("q", q_arch, rng);
  q_target = q;
  pi_target = pi;
  q_opt = {};
  has_q = true;
}

Checkpoint Learner::to_checkpoint() const {
  Checkpoint c;
  c.stage = stage;
  c.stage1_episodes = stage1_episodes;
  c.stage2_episodes = stage2_episodes;
  c.updates = updates;
  c.append(pi.params());
  c.append(v.params());
  c.append(v_target.params(), kTargetPrefix);
  if (has_q) {
    c.append(q.params());
    c.append(q_target.params(), kTargetPrefix);
    c.append(pi_target.params(), kTargetPrefix);
  }
  append_optimizer(c, pi_opt, pi.params(), "pi");
  append_optimizer(c, v_opt, v.params(), "v");
  if (has_q) append_optimizer(c, q_opt, q.params(), "q");
  return c;
}

Learner Learner::from_checkpoint(const Checkpoint& ckpt) {
  Learner l = create(0);
  l.stage = ckpt.stage;
  l.stage1_episodes = ckpt.stage1_episodes;
  l.stage2_episodes = ckpt.stage2_episodes;
  l.updates = ckpt.updates;
  ckpt.extract(l.pi.params());
  ckpt.extract(l.v.params());
  ckpt.extract(l.v_target.params(), kTargetPrefix);
  l.pi_opt = extract_optimizer(ckpt, l.pi.params(), "pi");
  l.v_opt = extract_optimizer(ckpt, l.v.params(), "v");
  if (ckpt.has_block("q.fc1.w")) {
    l.add_centralized(0);
    ckpt.extract(l.q.params());
    ckpt.extract(l.q_target.params(), kTargetPrefix);
    ckpt.extract(l.pi_target.params(), kTargetPrefix);
    l.q_opt = extract_optimizer(ckpt, l.q.params(), "q");
  }
  // Every block must have been consumed; anything else means the file was
  // written for a different layout.
  const std::size_t expected = l.to_checkpoint().blocks.size();
  if (expected != ckpt.blocks.size()) {
    throw Error("checkpoint holds " + std::to_string(ckpt.blocks.size()) +
                " blocks, expected " + std::to_string(expected));
  }
  return l;
}

// ---- objectives ----

double advantage_decentralized(double r, double v_now, double v_next, double gamma,
                               bool terminal) {
  return r + (terminal ? 0.0 : gamma * v_next) - v_now;
}

double counterfactual_baseline(const QNet& q, const GlobalState& state,
                               const SlotActions& joint, std::size_t slot,
                               const std::array<double, kNumActions>& pi) {
  const auto qv = q.action_values(state, joint, slot);
  double b = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (pi[i] > 0.0) b += pi[i] * qv[i];
  }
  return b;
}

double surrogate_J1(const Batch& batch, const PolicyNet& pi, const ValueNet& v, double gamma,
                    double entropy_coef) {
  const ValuePass vp = value_pass(batch, v, nullptr, gamma, false);
  return policy_pass(batch, pi, entropy_coef, vp.advantage, 1.0, nullptr, 0.0, false).surrogate;
}

nn::Gradients grad_J1(const Batch& batch, const PolicyNet& pi, const ValueNet& v, double gamma,
                      double entropy_coef) {
  const ValuePass vp = value_pass(batch, v, nullptr, gamma, false);
  return policy_pass(batch, pi, entropy_coef, vp.advantage, 1.0, nullptr, 0.0, true).grads;
}

LossResult loss_V(const Batch& batch, const ValueNet& v, const ValueNet& v_target, double gamma) {
  ValuePass vp = value_pass(batch, v, &v_target, gamma, true);
  return {vp.loss, std::move(vp.grads)};
}

std::vector<double> advantages_J2(const Batch& batch, const PolicyNet& pi, const QNet& q) {
  std::vector<double> out;
  TrunkCache cache;
  for (const auto& rec : batch) {
    for (const auto& s : rec.agents) {
      const auto p = masked_softmax(pi.forward(*s.obs, cache), s.mask);
      const auto qv = q.action_values(rec.state, rec.joint_action, s.slot);
      double baseline = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) baseline += p[i] * qv[i];
      }
      out.push_back(qv[static_cast<std::size_t>(s.action)] - baseline);
    }
  }
  return out;
}

double surrogate_J2(const Batch& batch, const PolicyNet& pi,
                    const std::vector<double>& advantages, double entropy_coef) {
  return policy_pass(batch, pi, entropy_coef, advantages, 1.0, nullptr, 0.0, false).surrogate;
}

nn::Gradients grad_J2(const Batch& batch, const PolicyNet& pi, const QNet& q,
                      double entropy_coef) {
  return policy_pass(batch, pi, entropy_coef, {}, 0.0, &q, 1.0, true).grads;
}

LossResult loss_Q(const Batch& batch, const QNet& q, const QNet& q_target,
                  const PolicyNet& pi_target, double gamma, std::uint64_t seed) {
  return q_pass(batch, q, q_target, pi_target, gamma, seed, true);
}

UpdateStats combined_update(const Batch& batch, Learner& learner, const TrainConfig& config,
                            std::uint64_t seed) {
  nn::OptimizerConfig policy_opt;
  policy_opt.lr = config.lr_policy;
  nn::OptimizerConfig critic_opt;
  critic_opt.lr = config.lr_critic;
  return combined_update(batch, learner, config, seed, policy_opt, critic_opt);
}

UpdateStats combined_update(const Batch& batch, Learner& learner, const TrainConfig& config,
                            std::uint64_t seed, const nn::OptimizerConfig& policy_opt,
                            const nn::OptimizerConfig& critic_opt) {
  audit_masks(batch);
  const bool use_q = config.alpha < 1.0;
  if (use_q && !learner.has_q) throw Error("combined_update: alpha < 1 needs a centralized critic");

  UpdateStats stats;
  ValuePass vp = value_pass(batch, learner.v, &learner.v_target, config.gamma, true);
  PolicyPass pp = policy_pass(batch, learner.pi, config.entropy_coef, vp.advantage, config.alpha,
                              use_q ? &learner.q : nullptr, 1.0 - config.alpha, true);
  LossResult qp;
  if (use_q) {
    qp = q_pass(batch, learner.q, learner.q_target, learner.pi_target, config.gamma, seed, true);
  }
  stats.samples = vp.advantage.size();
  stats.loss_v = vp.loss;
  stats.loss_q = qp.loss;
  stats.entropy = stats.samples ? pp.entropy / static_cast<double>(stats.samples) : 0.0;
  if (stats.samples == 0) return stats;

  if (!std::isfinite(vp.loss) || !std::isfinite(qp.loss)) {
    throw NonFiniteError("combined_update: non-finite critic loss");
  }
  nn::check_finite(pp.grads, "policy gradient");
  nn::check_finite(vp.grads, "value gradient");
  if (use_q) nn::check_finite(qp.grads, "centralized critic gradient");

  pp.grads.scale(-1.0);  // ascend J
  nn::optimize_step(learner.pi.params(), pp.grads, learner.pi_opt, policy_opt);
  nn::optimize_step(learner.v.params(), vp.grads, learner.v_opt, critic_opt);
  nn::soft_update(learner.v_target.params(), learner.v.params(), config.tau);
  if (use_q) {
    nn::optimize_step(learner.q.params(), qp.grads, learner.q_opt, critic_opt);
    nn::soft_update(learner.q_target.params(), learner.q.params(), config.tau);
    nn::soft_update(learner.pi_target.params(), learner.pi.params(), config.tau);
  } else if (learner.has_q) {
    nn::soft_update(learner.pi_target.params(), learner.pi.params(), config.tau);
  }
  ++learner.updates;
  return stats;
}

// ---- curriculum ----

namespace {

ScenarioRandomization randomization(const TrainConfig& c) {
  ScenarioRandomization r;
  r.entry_window_s = c.entry_window_s;
  r.min_initial_v = c.min_initial_v;
  r.max_initial_v = c.max_initial_v;
  r.preplace_fraction = c.preplace_fraction;
  r.max_initial_s = c.max_initial_s;
  r.equal_priority_prob = c.equal_priority_prob;
  return r;
}

enum class Phase : std::uint64_t { kStage1 = 1, kStage2 = 2, kDirect = 3 };

std::uint64_t phase_seed(const TrainConfig& c, Phase phase, std::uint64_t episode,
                         std::uint64_t salt) {
  return mix_seed(mix_seed(c.seed, static_cast<std::uint64_t>(phase) * 7919 + salt), episode);
}

using ScenarioFn = ScenarioSpec (*)(const TrainConfig&, std::uint64_t);

void run_phase(Learner& learner, const TrainConfig& config, Phase phase, std::uint64_t episodes,
               ScenarioFn scenario, double alpha, std::uint64_t& counter, const TrainHooks& hooks) {
  TrainConfig update_config = config;
  update_config.alpha = alpha;
  RolloutOptions options;
  options.max_steps = config.max_steps;
  options.training = true;
  options.q_slots = learner.q_arch.slots;
  const int stage_tag = phase == Phase::kStage1 ? 1 : 2;

  const auto workers = static_cast<std::uint64_t>(config.workers);
  for (std::uint64_t done = 0; done < episodes;) {
    const std::uint64_t n = std::min(workers, episodes - done);
    std::vector<EpisodeResult> results(n);
    std::vector<ScenarioSpec> specs(n);
    auto run_one = [&](std::uint64_t i, const PolicyNet* net) {
      const std::uint64_t ep = counter + i;
      specs[i] = scenario(config, ep);
      Rng rng(phase_seed(config, phase, ep, 1));
      DriverSet drivers;
      drivers.policy = net;
      results[i] = rollout_episode(specs[i], drivers, rng, options);
    };
    if (n == 1) {
      run_one(0, &learner.pi);
    } else {
      // Rollouts share one immutable snapshot; updates stay sequential.
      const PolicyNet snapshot = learner.pi;
      std::vector<std::jthread> threads;
      for (std::uint64_t i = 0; i < n; ++i) threads.emplace_back(run_one, i, &snapshot);
    }
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::uint64_t ep = counter;
      EpisodeLog log;
      try {
        log.stats = combined_update(results[i].transitions, learner, update_config,
                                    phase_seed(config, phase, ep, 2));
      } catch (const NonFiniteError&) {
        if (hooks.on_failure) hooks.on_failure(learner);
        throw;
      }
      ++counter;
      ++done;
      log.episode = counter;
      log.stage = stage_tag;
      log.steps = results[i].steps;
      log.end_reason = results[i].end_reason;
      int successes = 0;
      double total = 0.0;
      for (const VehicleState& v : results[i].final_world.vehicles) {
        if (v.controller != Controller::kPolicy) continue;
        auto it = results[i].total_reward.find(v.id);
        const double r = it == results[i].total_reward.end() ? 0.0 : it->second;
        log.returns[v.id] = r;
        log.success[v.id] = results[i].succeeded(v.id);
        successes += log.success[v.id] ? 1 : 0;
        total += r;
      }
      if (!log.returns.empty()) {
        log.mean_return = total / static_cast<double>(log.returns.size());
        log.success_rate = static_cast<double>(successes) / static_cast<double>(log.returns.size());
      }
      if (hooks.on_episode) hooks.on_episode(log);
      if (config.checkpoint_every > 0 && counter % config.checkpoint_every == 0 &&
          hooks.on_checkpoint) {
        hooks.on_checkpoint(learner);
      }
    }
  }
}

}  // namespace

ScenarioSpec stage1_scenario(const TrainConfig& config, std::uint64_t episode) {
  ScenarioRandomization r = randomization(config);
  r.min_agents = config.stage1_min_robots + 1;
  r.max_agents = config.stage1_max_robots + 1;
  r.controller = Controller::kRobot;
  ScenarioSpec spec = generate_scenario(phase_seed(config, Phase::kStage1, episode, 3), r);
  Rng rng(phase_seed(config, Phase::kStage1, episode, 4));
  const auto learner = static_cast<std::size_t>(
      uniform_int(rng, 0, static_cast<std::int64_t>(spec.entries.size()) - 1));
  spec.entries[learner].controller = Controller::kPolicy;

  // Random placement of the learner along the whole road, so that every
  // distance to the finish is visited early in training.
  std::vector<ScenarioEntry> others;
  for (std::size_t i = 0; i < spec.entries.size(); ++i) {
    if (i != learner && spec.entries[i].entry_time_s == 0.0) others.push_back(spec.entries[i]);
  }
  ScenarioEntry e = spec.entries[learner];
  const RoadNetwork road = spec.road();
  const double limit = spec.speed_limit[static_cast<std::size_t>(e.lane)];
  const double v_hi = std::min(config.max_initial_v, limit);
  const double v_lo = std::min(config.min_initial_v, v_hi);
  for (int attempt = 0; attempt < 50; ++attempt) {
    e.entry_time_s = 0.0;
    e.initial_s = uniform(rng, 0.0, config.learner_max_initial_s);
    e.initial_v = uniform(rng, v_lo, v_hi);
    if (placement_compatible(e, others, road)) {
      spec.entries[learner] = e;
      break;
    }
  }
  spec.validate();
  return spec;
}

ScenarioSpec stage2_scenario(const TrainConfig& config, std::uint64_t episode) {
  ScenarioRandomization r = randomization(config);
  r.min_agents = config.stage2_agent_count;
  r.max_agents = config.stage2_agent_count;
  r.controller = Controller::kPolicy;
  return generate_scenario(phase_seed(config, Phase::kStage2, episode, 3), r);
}

void train_stage1(Learner& learner, const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  learner.stage = 1;
  run_phase(learner, config, Phase::kStage1, config.stage1_episodes, &stage1_scenario, 1.0,
            learner.stage1_episodes, hooks);
}

void train_stage2(Learner& learner, const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (!learner.has_q) learner.add_centralized(mix_seed(config.seed, 2));
  learner.stage = 2;
  run_phase(learner, config, Phase::kStage2, config.stage2_episodes, &stage2_scenario,
            config.alpha, learner.stage2_episodes, hooks);
}

void train_direct(Learner& learner, const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (!learner.has_q) learner.add_centralized(mix_seed(config.seed, 3));
  learner.stage = 2;
  run_phase(learner, config, Phase::kDirect, config.direct_episodes, &stage2_scenario,
            config.alpha, learner.stage2_episodes, hooks);
}

}  // namespace idas
