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

#include <cmath>

#include "fixtures.hpp"
#include "idas/training.hpp"

namespace idas {
namespace {

using testing::brute_force_baseline;
using testing::gradcheck;
using testing::random_batch;
using testing::random_obs;
using testing::small_q;
using testing::small_trunk;

// Zeroes every weight so the network outputs its head bias.
void bias_only(TrunkNet& net, const std::vector<double>& head_bias) {
  net.params().fill(0.0);
  net.params().blocks().back().value.data = head_bias;
}

TEST(Advantage, Examples) {
  EXPECT_NEAR(advantage_decentralized(1.0, 2.5, 2.0, 0.9, false), 0.3, 1e-12);
  EXPECT_DOUBLE_EQ(advantage_decentralized(20.0, 18.0, 123.0, 0.9, true), 2.0);
}

TEST(Advantage, ExactCriticOnChainIsZero) {
  const double gamma = 0.9;
  const std::vector<double> r = {1.0, -2.0, 12.5};
  // Solve the chain backwards: V2 = r2, V1 = r1 + g V2, V0 = r0 + g V1.
  std::vector<double> v(3);
  v[2] = r[2];
  v[1] = r[1] + gamma * v[2];
  v[0] = r[0] + gamma * v[1];
  for (int t = 0; t < 3; ++t) {
    const bool terminal = t == 2;
    const double next = terminal ? 0.0 : v[static_cast<std::size_t>(t + 1)];
    EXPECT_NEAR(advantage_decentralized(r[static_cast<std::size_t>(t)],
                                        v[static_cast<std::size_t>(t)], next, gamma, terminal),
                0.0, 1e-12);
  }
}

TEST(Baseline, ConstantQ) {
  Rng rng(1);
  QNet q("q", small_q(), rng);
  q.params().fill(0.0);
  q.params().blocks().back().value.data = {3.5};
  std::array<double, kNumActions> pi{};
  pi[1] = 0.4;
  pi[4] = 0.6;
  EXPECT_DOUBLE_EQ(counterfactual_baseline(q, testing::random_state(2, rng), {1, 2}, 0, pi), 3.5);
}

TEST(Baseline, TwoActionWeightedSum) {
  Rng rng(2);
  QNet q("q", small_q(), rng);
  q.params().fill(0.0);
  // h1[0] = 1 for action 1 and 2 for action 2 in slot 0, passed through.
  auto& w1 = q.params()[0].data;
  const std::size_t in = small_q().input_size();
  w1[kSlotStateFeatures + 1] = 1.0;
  w1[kSlotStateFeatures + 2] = 2.0;
  q.params()[2].data[0] = 1.0;  // fc2 picks h1[0]
  q.params()[4].data[0] = 1.0;  // output picks h2[0]
  (void)in;
  std::array<double, kNumActions> pi{};
  pi[1] = 0.25;
  pi[2] = 0.75;
  EXPECT_DOUBLE_EQ(counterfactual_baseline(q, testing::random_state(2, rng), {1, 0}, 0, pi), 1.75);
}

TEST(Baseline, MatchesBruteForceOnRandomInstances) {
  Rng rng(3);
  QNet q("q", QArch{}, rng);
  for (int k = 0; k < 200; ++k) {
    const GlobalState s = testing::random_state(kDefaultSlots, rng);
    SlotActions joint(kDefaultSlots);
    for (int& a : joint) a = static_cast<int>(uniform_int(rng, 0, kNumActions - 1));
    const std::size_t slot = static_cast<std::size_t>(uniform_int(rng, 0, kDefaultSlots - 1));
    const ActionMask m = testing::random_mask(rng);
    std::array<double, kNumActions> logits{};
    for (double& x : logits) x = uniform(rng, -3.0, 3.0);
    const auto pi = masked_softmax(logits, m);
    EXPECT_NEAR(counterfactual_baseline(q, s, joint, slot, pi),
                brute_force_baseline(q, s, joint, slot, pi), 1e-12);
  }
}

TEST(LossV, Examples) {
  Rng rng(4);
  const TrunkArch arch = small_trunk(1);
  ValueNet v("v", arch, rng), vt("vt", arch, rng);
  bias_only(v, {0.0});
  bias_only(vt, {0.0});
  Batch batch(1);
  AgentStep s;
  s.obs = std::make_shared<EncodedObs>(random_obs(arch, rng));
  s.next_obs = std::make_shared<EncodedObs>(random_obs(arch, rng));
  s.mask = ActionMask::all();
  s.reward = 0.0;
  batch[0].agents.push_back(s);
  EXPECT_EQ(loss_V(batch, v, vt, 0.9).loss, 0.0);
  batch[0].agents[0].reward = 1.0;
  bias_only(vt, {1.0});
  EXPECT_NEAR(loss_V(batch, v, vt, 0.9).loss, 1.805, 1e-12);
}

TEST(LossV, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  const TrunkArch arch = small_trunk(1);
  for (int k = 0; k < 10; ++k) {
    ValueNet v("v", arch, rng), vt("vt", arch, rng);
    const Batch batch = random_batch(arch, small_q(), rng);
    const LossResult res = loss_V(batch, v, vt, 0.9);
    const auto check = gradcheck(v.params(), res.grads, [&] { return loss_V(batch, v, vt, 0.9).loss; });
    EXPECT_LT(check.max_rel_error, 1e-4);
  }
}

TEST(LossQ, Examples) {
  Rng rng(6);
  const TrunkArch arch = small_trunk();
  QNet q("q", small_q(), rng), qt("qt", small_q(), rng);
  PolicyNet pt("pt", arch, rng);
  q.params().fill(0.0);
  qt.params().fill(0.0);
  TransitionRecord rec;
  rec.state = testing::random_state(2, rng);
  rec.next_state = testing::random_state(2, rng);
  rec.joint_action = {1, 3};
  rec.next_fixed_actions = {-1, 2};
  rec.next_agents.push_back({0, std::make_shared<EncodedObs>(random_obs(arch, rng)),
                             ActionMask::all()});
  rec.terminal = true;
  rec.joint_reward = -15.0;
  q.params().blocks().back().value.data = {-15.0};
  EXPECT_EQ(loss_Q({rec}, q, qt, pt, 0.9, 1).loss, 0.0);
  rec.terminal = false;
  rec.joint_reward = 2.0;
  q.params().blocks().back().value.data = {0.0};
  qt.params().blocks().back().value.data = {10.0};
  EXPECT_NEAR(loss_Q({rec}, q, qt, pt, 0.9, 1).loss, 60.5, 1e-12);
}

TEST(LossQ, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  const TrunkArch arch = small_trunk();
  for (int k = 0; k < 10; ++k) {
    QNet q("q", small_q(), rng), qt("qt", small_q(), rng);
    PolicyNet pt("pt", arch, rng);
    const Batch batch = random_batch(arch, small_q(), rng);
    const LossResult res = loss_Q(batch, q, qt, pt, 0.9, 11);
    const auto check =
        gradcheck(q.params(), res.grads, [&] { return loss_Q(batch, q, qt, pt, 0.9, 11).loss; });
    EXPECT_LT(check.max_rel_error, 1e-4);
  }
}

TEST(J1, ZeroAdvantageGivesZeroGradient) {
  Rng rng(8);
  const TrunkArch arch = small_trunk();
  PolicyNet pi("pi", arch, rng);
  ValueNet v("v", small_trunk(1), rng);
  bias_only(v, {0.0});
  Batch batch = random_batch(arch, small_q(), rng);
  for (auto& rec : batch) {
    for (auto& s : rec.agents) s.reward = 0.0;
  }
  EXPECT_EQ(grad_J1(batch, pi, v, 0.9, 0.0).squared_norm(), 0.0);
  EXPECT_GT(grad_J1(batch, pi, v, 0.9, 0.01).squared_norm(), 0.0);
}

TEST(J1, HeadBiasGradientIsAnalytic) {
  Rng rng(9);
  const TrunkArch arch = small_trunk();
  PolicyNet pi("pi", arch, rng);
  ValueNet v("v", small_trunk(1), rng);
  bias_only(pi, {0.3, -0.2, 0.0, 0.0, 0.0, 0.0, 0.0});
  bias_only(v, {0.0});
  ActionMask m;
  m.permit(ActionId::kDec2);
  m.permit(ActionId::kDec1);
  Batch batch(1);
  AgentStep s;
  s.obs = std::make_shared<EncodedObs>(random_obs(arch, rng));
  s.mask = m;
  s.action = 0;
  s.reward = 2.0;
  s.terminal = true;
  batch[0].agents.push_back(s);
  // With V = 0 the advantage is the reward; d/db_0 of 2 log p0 = 2 (1 - p0).
  const double p0 = 1.0 / (1.0 + std::exp(-0.5));
  const nn::Gradients g = grad_J1(batch, pi, v, 0.9, 0.0);
  const auto& gb = g.blocks().back().value.data;
  EXPECT_NEAR(gb[0], 2.0 * (1.0 - p0), 1e-12);
  EXPECT_NEAR(gb[1], -2.0 * (1.0 - p0), 1e-12);
  for (std::size_t i = 2; i < gb.size(); ++i) EXPECT_EQ(gb[i], 0.0);
}

TEST(J1, GradientMatchesFiniteDifferences) {
  Rng rng(10);
  const TrunkArch arch = small_trunk();
  for (int k = 0; k < 10; ++k) {
    PolicyNet pi("pi", arch, rng);
    ValueNet v("v", small_trunk(1), rng);
    const Batch batch = random_batch(arch, small_q(), rng);
    const nn::Gradients g = grad_J1(batch, pi, v, 0.9, 0.01);
    const auto check =
        gradcheck(pi.params(), g, [&] { return surrogate_J1(batch, pi, v, 0.9, 0.01); });
    EXPECT_LT(check.max_rel_error, 1e-4);
  }
}

TEST(J2, ConstantQGivesZeroGradient) {
  Rng rng(11);
  const TrunkArch arch = small_trunk();
  PolicyNet pi("pi", arch, rng);
  QNet q("q", small_q(), rng);
  q.params().fill(0.0);
  q.params().blocks().back().value.data = {4.0};
  const Batch batch = random_batch(arch, small_q(), rng);
  EXPECT_LT(grad_J2(batch, pi, q, 0.0).squared_norm(), 1e-24);
  for (double a : advantages_J2(batch, pi, q)) EXPECT_NEAR(a, 0.0, 1e-14);
}

TEST(J2, GradientMatchesFiniteDifferences) {
  Rng rng(12);
  const TrunkArch arch = small_trunk();
  for (int k = 0; k < 10; ++k) {
    PolicyNet pi("pi", arch, rng);
    QNet q("q", small_q(), rng);
    const Batch batch = random_batch(arch, small_q(), rng);
    const nn::Gradients g = grad_J2(batch, pi, q, 0.01);
    const std::vector<double> adv = advantages_J2(batch, pi, q);
    const auto check =
        gradcheck(pi.params(), g, [&] { return surrogate_J2(batch, pi, adv, 0.01); });
    EXPECT_LT(check.max_rel_error, 1e-4);
  }
}

// Two-action bandit, one agent: both objectives push the same way when the
// taken action is the better one.
TEST(J2, AgreesWithJ1OnBandit) {
  Rng rng(13);
  const TrunkArch arch = small_trunk();
  PolicyNet pi("pi", arch, rng);
  ValueNet v("v", small_trunk(1), rng);
  QNet q("q", small_q(), rng);
  bias_only(pi, {0, 0, 0, 0, 0, 0, 0});
  bias_only(v, {0.5});
  q.params().fill(0.0);
  q.params()[0].data[kSlotStateFeatures + 3] = 1.0;  // Q = 1 for acc1, 0 for keep
  q.params()[2].data[0] = 1.0;
  q.params()[4].data[0] = 1.0;
  ActionMask m;
  m.permit(ActionId::kKeep);
  m.permit(ActionId::kAcc1);
  Batch batch(1);
  AgentStep s;
  s.obs = std::make_shared<EncodedObs>(random_obs(arch, rng));
  s.mask = m;
  s.action = index_of(ActionId::kAcc1);
  s.reward = 1.0;
  s.terminal = true;
  batch[0].agents.push_back(s);
  batch[0].state = testing::random_state(2, rng);
  batch[0].state.present[1] = false;
  batch[0].joint_action = {s.action, -1};
  const auto g1 = grad_J1(batch, pi, v, 0.9, 0.0).blocks().back().value.data;
  const auto g2 = grad_J2(batch, pi, q, 0.0).blocks().back().value.data;
  // A1 = 1 - 0.5, A2 = 1 - 0.5: identical gradients.
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-12);
  EXPECT_GT(g1[3], 0.0);
  EXPECT_LT(g1[2], 0.0);
}

struct Snapshot {
  nn::ParamSet pi, v, q;
};

Snapshot delta_after(double alpha, const Batch& batch, const Learner& start) {
  Learner l = start;
  TrainConfig cfg;
  cfg.alpha = alpha;
  nn::OptimizerConfig sgd;
  sgd.kind = nn::OptimizerKind::kSgd;
  sgd.lr = 0.05;
  combined_update(batch, l, cfg, 3, sgd, sgd);
  Snapshot d{l.pi.params(), l.v.params(), l.q.params()};
  d.pi.axpy(-1.0, start.pi.params());
  d.v.axpy(-1.0, start.v.params());
  d.q.axpy(-1.0, start.q.params());
  return d;
}

TEST(CombinedUpdate, PolicyDeltaIsLinearInAlpha) {
  Rng rng(14);
  Learner start = Learner::create(5, small_trunk(), small_q());
  start.add_centralized(5);
  const Batch batch = random_batch(small_trunk(), small_q(), rng);
  const Snapshot d1 = delta_after(1.0, batch, start);
  const Snapshot d0 = delta_after(0.0, batch, start);
  const Snapshot dm = delta_after(0.7, batch, start);
  for (std::size_t i = 0; i < dm.pi.numel(); ++i) {
    const double expected = 0.7 * d1.pi.flat(i) + 0.3 * d0.pi.flat(i);
    EXPECT_NEAR(dm.pi.flat(i), expected, 1e-12 + 1e-9 * std::abs(expected));
  }
  // alpha = 1 leaves the centralized critic untouched.
  EXPECT_EQ(d1.q.squared_norm(), 0.0);
  EXPECT_GT(d0.q.squared_norm(), 0.0);
}

TEST(CombinedUpdate, TargetsMoveOnlyBySoftUpdate) {
  Rng rng(15);
  Learner l = Learner::create(6, small_trunk(), small_q());
  l.add_centralized(6);
  const Learner before = l;
  TrainConfig cfg;
  combined_update(random_batch(small_trunk(), small_q(), rng), l, cfg, 1);
  nn::ParamSet expect_v = before.v_target.params();
  nn::soft_update(expect_v, l.v.params(), cfg.tau);
  EXPECT_EQ(l.v_target.params(), expect_v);
  nn::ParamSet expect_q = before.q_target.params();
  nn::soft_update(expect_q, l.q.params(), cfg.tau);
  EXPECT_EQ(l.q_target.params(), expect_q);
  nn::ParamSet expect_pi = before.pi_target.params();
  nn::soft_update(expect_pi, l.pi.params(), cfg.tau);
  EXPECT_EQ(l.pi_target.params(), expect_pi);
}

TEST(CombinedUpdate, RejectsForbiddenAction) {
  Rng rng(16);
  Learner l = Learner::create(7, small_trunk(), small_q());
  Batch batch = random_batch(small_trunk(), small_q(), rng);
  auto& s = batch[0].agents[0];
  s.mask = ActionMask::none();
  s.mask.permit(ActionId::kHardBrake);
  s.action = index_of(ActionId::kKeep);
  TrainConfig cfg;
  cfg.alpha = 1.0;
  EXPECT_THROW(combined_update(batch, l, cfg, 1), ContractViolation);
}

TEST(CombinedUpdate, NeedsCentralizedCriticBelowAlphaOne) {
  Rng rng(17);
  Learner l = Learner::create(8, small_trunk(), small_q());
  TrainConfig cfg;
  EXPECT_THROW(combined_update(random_batch(small_trunk(), small_q(), rng), l, cfg, 1), Error);
}

TEST(Config, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.alpha = 1.5;
  EXPECT_THROW(c.validate(), Error);
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.seed = 9;
  c.stage1_episodes = 3;
  c.stage2_episodes = 2;
  c.stage2_agent_count = 3;
  c.max_steps = 120;
  return c;
}

TEST(Curriculum, ZeroEpisodes) {
  TrainConfig c = tiny_config();
  c.stage1_episodes = 0;
  c.stage2_episodes = 0;
  Learner l = Learner::create(c.seed);
  const std::string fresh = serialize_checkpoint(l.to_checkpoint());
  train_stage1(l, c);
  EXPECT_EQ(serialize_checkpoint(l.to_checkpoint()), fresh);
  train_stage2(l, c);
  EXPECT_TRUE(l.has_q);
  EXPECT_TRUE(l.to_checkpoint().has_block("q.fc1.w"));
  EXPECT_EQ(l.stage, 2u);
}

TEST(Curriculum, DeterministicCheckpoints) {
  auto run = [] {
    const TrainConfig c = tiny_config();
    Learner l = Learner::create(c.seed);
    std::vector<double> returns;
    TrainHooks hooks;
    hooks.on_episode = [&](const EpisodeLog& log) { returns.push_back(log.mean_return); };
    train_stage1(l, c, hooks);
    train_stage2(l, c, hooks);
    return std::make_pair(serialize_checkpoint(l.to_checkpoint()), returns);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_EQ(a.second.size(), 5u);
}

TEST(Curriculum, ScenarioShapes) {
  const TrainConfig c = tiny_config();
  for (std::uint64_t e = 0; e < 20; ++e) {
    const ScenarioSpec s1 = stage1_scenario(c, e);
    int learners = 0;
    for (const auto& entry : s1.entries) learners += entry.controller == Controller::kPolicy;
    EXPECT_EQ(learners, 1);
    EXPECT_GE(s1.entries.size(), 3u);
    EXPECT_LE(s1.entries.size(), 5u);
    const ScenarioSpec s2 = stage2_scenario(c, e);
    EXPECT_EQ(s2.entries.size(), 3u);
    for (const auto& entry : s2.entries) EXPECT_EQ(entry.controller, Controller::kPolicy);
  }
}

}  // namespace
}  // namespace idas
