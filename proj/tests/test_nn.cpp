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

#include <numeric>

#include "fixtures.hpp"
#include "idas/networks.hpp"
#include "test_util.hpp"

namespace idas {
namespace {

using testing::gradcheck;
using testing::random_obs;
using testing::small_q;
using testing::small_trunk;

TEST(ParamSet, FlatIndexingAndLayout) {
  nn::ParamSet p;
  p.add("a", {2, 3});
  p.add("b", {4});
  EXPECT_EQ(p.numel(), 10u);
  p.flat(7) = 5.0;
  EXPECT_EQ(p.at("b").data[1], 5.0);
  EXPECT_THROW(p.flat(10), Error);
  EXPECT_THROW(p.at("c"), Error);
  EXPECT_TRUE(p.same_layout(p.zeros_like()));
}

TEST(Dense, MatchesHandComputation) {
  nn::Tensor w({2, 3}), b({2});
  w.data = {1, 2, 3, -1, 0, 1};
  b.data = {0.5, -0.5};
  const double x[3] = {1, 1, 2};
  double y[2];
  nn::dense_forward(w, b, x, y);
  EXPECT_EQ(y[0], 9.5);
  EXPECT_EQ(y[1], 0.5);
  nn::Tensor dw({2, 3}), db({2});
  const double dy[2] = {1.0, 2.0};
  double dx[3];
  nn::dense_backward(w, x, dy, dw, db, dx);
  EXPECT_EQ(dw.data, (std::vector<double>{1, 1, 2, 2, 2, 4}));
  EXPECT_EQ(db.data, (std::vector<double>{1, 2}));
  EXPECT_EQ(dx[0], -1.0);
  EXPECT_EQ(dx[1], 2.0);
  EXPECT_EQ(dx[2], 5.0);
}

TEST(SoftUpdate, Endpoints) {
  nn::ParamSet t, o;
  t.add("w", {3});
  o.add("w", {3});
  o.fill(1.0);
  nn::soft_update(t, o, 0.01);
  for (double x : t[0].data) EXPECT_DOUBLE_EQ(x, 0.01);
  o.fill(3.0);
  nn::soft_update(t, o, 1.0);
  EXPECT_EQ(t, o);
  EXPECT_THROW(nn::soft_update(t, o, 0.0), Error);
}

TEST(Optimizer, ZeroGradientLeavesParamsAndDecaysMoments) {
  nn::ParamSet p;
  p.add("w", {2});
  p.fill(0.3);
  nn::Gradients g = p.zeros_like();
  nn::OptimizerState st = nn::OptimizerState::for_params(p);
  st.m.fill(1.0);
  st.v.fill(1.0);
  nn::OptimizerConfig cfg;
  const nn::ParamSet before = p;
  // Moments alone still move Adam; the check is on the decay.
  nn::optimize_step(p, g, st, cfg);
  EXPECT_DOUBLE_EQ(st.m[0].data[0], 0.9);
  EXPECT_DOUBLE_EQ(st.v[0].data[0], 0.999);
  nn::ParamSet q = before;
  nn::OptimizerState fresh;
  nn::optimize_step(q, g, fresh, cfg);
  EXPECT_EQ(q, before);
}

TEST(Optimizer, AdamFirstStepIsSignedLearningRate) {
  nn::ParamSet p;
  p.add("w", {2});
  nn::Gradients g = p.zeros_like();
  g[0].data = {3.0, -0.5};
  nn::OptimizerState st;
  nn::OptimizerConfig cfg;
  cfg.lr = 0.1;
  nn::optimize_step(p, g, st, cfg);
  EXPECT_NEAR(p[0].data[0], -0.1, 1e-8);
  EXPECT_NEAR(p[0].data[1], 0.1, 1e-7);
}

TEST(Optimizer, NonFiniteGradientNamesBlock) {
  nn::ParamSet p;
  p.add("layer.w", {2});
  nn::Gradients g = p.zeros_like();
  g[0].data[1] = std::nan("");
  nn::OptimizerState st;
  try {
    nn::optimize_step(p, g, st, {});
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.w"), std::string::npos);
  }
}

TEST(MaskedSoftmax, Examples) {
  const std::array<double, kNumActions> zeros{};
  ActionMask m;
  m.permit(ActionId::kKeep);
  m.permit(ActionId::kDec1);
  m.permit(ActionId::kHardBrake);
  auto p = masked_softmax(zeros, m);
  for (int i = 0; i < kNumActions; ++i) {
    EXPECT_NEAR(p[static_cast<std::size_t>(i)],
                m.permitted[static_cast<std::size_t>(i)] ? 1.0 / 3.0 : 0.0, 1e-15);
  }
  ActionMask one;
  one.permit(ActionId::kAcc2);
  p = masked_softmax(std::array<double, kNumActions>{5, 1, 2, 3, -100, 7, 0}, one);
  EXPECT_EQ(p[static_cast<std::size_t>(index_of(ActionId::kAcc2))], 1.0);
  EXPECT_THROW(masked_softmax(zeros, ActionMask::none()), Error);
}

TEST(MaskedSoftmax, LargeLogitsStayFinite) {
  const std::array<double, kNumActions> logits{1000, -1000, 999, 0, 0, 0, 0};
  const auto p = masked_softmax(logits, ActionMask::all());
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(PolicyNet, FullSizeDistribution) {
  Rng rng(3);
  PolicyNet pi("pi", TrunkArch{}, rng);
  const std::size_t expected = (1 * 32 + 32) * 2 + (4 * 32 + 32) + (2 * 3 * 30 + 2) +
                               (1580 * 64 + 64) + 2 * (64 * 64 + 64) + (64 * 7 + 7);
  EXPECT_EQ(pi.params().numel(), expected);
  EXPECT_EQ(TrunkArch{}.concat_size(), 1580u);
  for (int k = 0; k < 20; ++k) {
    const EncodedObs o = random_obs(TrunkArch{}, rng);
    const ActionMask m = testing::random_mask(rng);
    const auto p = policy_forward(pi, o, m);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    for (int i = 0; i < kNumActions; ++i) {
      if (!m.permitted[static_cast<std::size_t>(i)]) EXPECT_EQ(p[static_cast<std::size_t>(i)], 0.0);
    }
  }
}

TEST(ValueNet, ZeroWeightsAndPurity) {
  Rng rng(4);
  ValueNet v("v", small_trunk(1), rng);
  const EncodedObs o = random_obs(small_trunk(1), rng);
  EXPECT_EQ(v_forward(v, o), v_forward(v, o));
  v.params().fill(0.0);
  EXPECT_EQ(v_forward(v, o), 0.0);
  EncodedObs bad = o;
  bad.grid.pop_back();
  EXPECT_THROW(v_forward(v, bad), Error);
}

// Scatter-based convolution against a dense sliding-window oracle.
TEST(TrunkNet, ConvolutionMatchesDenseOracle) {
  Rng rng(5);
  TrunkArch arch = small_trunk();
  arch.filters = 2;
  TrunkNet net("t", arch, rng);
  // The cached concat holds the rectified conv outputs after the branches.
  const EncodedObs o = random_obs(arch, rng);
  TrunkCache cache;
  net.forward(o, cache);
  const auto& w = net.params().at("t.conv.w").data;
  const auto& b = net.params().at("t.conv.b").data;
  const std::size_t R = arch.conv_rows(), C = arch.conv_cols();
  for (std::size_t f = 0; f < arch.filters; ++f) {
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        double acc = b[f];
        for (std::size_t i = 0; i < arch.kernel_rows; ++i) {
          for (std::size_t j = 0; j < arch.kernel_cols; ++j) {
            acc += w[(f * arch.kernel_rows + i) * arch.kernel_cols + j] *
                   o.grid[(r + i) * arch.grid_cols + c + j];
          }
        }
        const double got = cache.concat[3 * arch.branch_units + (f * R + r) * C + c];
        EXPECT_NEAR(got, std::max(0.0, acc), 1e-12);
      }
    }
  }
}

TEST(TrunkNet, BackwardMatchesFiniteDifferences) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const TrunkArch arch = small_trunk();
    TrunkNet net("t", arch, rng);
    ASSERT_LE(net.params().numel(), 500u);
    const EncodedObs o = random_obs(arch, rng);
    std::vector<double> dout(arch.outputs);
    for (double& x : dout) x = uniform(rng, -1.0, 1.0);
    auto f = [&] {
      TrunkCache c;
      const auto out = net.forward(o, c);
      return std::inner_product(out.begin(), out.end(), dout.begin(), 0.0);
    };
    nn::Gradients g = net.params().zeros_like();
    TrunkCache cache;
    net.forward(o, cache);
    net.backward(o, cache, dout, g);
    const auto res = gradcheck(net.params(), g, f);
    EXPECT_LT(res.max_rel_error, 1e-4);
    EXPECT_GT(res.checked, res.skipped);
  }
}

TEST(QNet, BackwardMatchesFiniteDifferences) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    QNet q("q", small_q(), rng);
    ASSERT_LE(q.params().numel(), 500u);
    const GlobalState s = testing::random_state(small_q().slots, rng);
    const SlotActions a = {2, 5};
    const auto x = q.make_input(s, a);
    auto f = [&] {
      QCache c;
      return q.forward(x, c);
    };
    nn::Gradients g = q.params().zeros_like();
    QCache cache;
    q.forward(x, cache);
    q.backward(cache, 1.0, g);
    EXPECT_LT(gradcheck(q.params(), g, f).max_rel_error, 1e-4);
  }
}

TEST(QNet, ActionValuesMatchSubstitution) {
  Rng rng(8);
  QNet q("q", QArch{}, rng);
  GlobalState s = testing::random_state(kDefaultSlots, rng);
  s.present[6] = false;
  const SlotActions joint = {0, 1, 2, 3, 4, 5, -1, 6};
  for (std::size_t slot : {0u, 3u, 7u}) {
    const auto values = q.action_values(s, joint, slot);
    for (int a = 0; a < kNumActions; ++a) {
      SlotActions sub = joint;
      sub[slot] = a;
      EXPECT_NEAR(values[static_cast<std::size_t>(a)], q_forward(q, s, sub), 1e-12);
    }
  }
  EXPECT_THROW(q.action_values(s, joint, 6), Error);
}

TEST(QNet, AbsentSlotsAreZero) {
  Rng rng(9);
  QNet q("q", small_q(), rng);
  GlobalState s = testing::random_state(2, rng);
  s.present[1] = false;
  const auto x = q.make_input(s, {3, 4});
  for (std::size_t i = kSlotFeatures; i < 2 * kSlotFeatures; ++i) EXPECT_EQ(x[i], 0.0);
  EXPECT_EQ(x[kSlotStateFeatures + 3], 1.0);
}

TEST(Encoding, Scales) {
  AgentObservation o;
  o.priority = 1;
  o.driver_type = -2.0;
  o.v = 10.0;
  o.a = -4.0;
  o.dist_to_merge = 75.0;
  o.post_brake = true;
  o.obs_cl.occupancy[5] = 1.0;
  o.obs_cl.rel_speed[5] = 5.0;
  const EncodedObs x = encode_observation(o);
  EXPECT_EQ(x.priority, 1.0);
  EXPECT_EQ(x.driver_type, -1.0);
  EXPECT_EQ(x.local, (std::vector<double>{0.5, -1.0, 0.5, 1.0}));
  EXPECT_EQ(x.grid[5], 1.0);
  EXPECT_EQ(x.grid[kGridCells + 5], 0.5);
}

TEST(Encoding, GlobalStateSlots) {
  auto w = testing::world_of({testing::car(0, 0, 150, 10, 2.0), testing::car(1, 1, 75, 20)});
  w.vehicle(1).behavior.b_type = 1.0;
  const GlobalState g = encode_global_state(w, 3);
  EXPECT_EQ(g.present, (std::vector<bool>{true, true, false}));
  EXPECT_EQ(g.slots[0], (std::array<double, 6>{0, 0, 0.5, 0.5, 1, 0}));
  EXPECT_EQ(g.slots[1], (std::array<double, 6>{1, -0.5, 1, 0, 0, 0.5}));
}

}  // namespace
}  // namespace idas
