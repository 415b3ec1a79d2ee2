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

// Shared test fixtures: reduced network shapes, synthetic batches and a
// central-difference gradient checker.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

#include "idas/nn.hpp"
#include "idas/training.hpp"

namespace idas::testing {

/// Trunk small enough for exhaustive finite differences (< 200 parameters).
inline TrunkArch small_trunk(std::size_t outputs = kNumActions) {
  TrunkArch a;
  a.branch_units = 2;
  a.grid_rows = 4;
  a.grid_cols = 8;
  a.kernel_rows = 3;
  a.kernel_cols = 3;
  a.filters = 1;
  a.hidden = 4;
  a.outputs = outputs;
  return a;
}

inline QArch small_q() {
  QArch q;
  q.slots = 2;
  q.hidden = 8;
  return q;
}

inline EncodedObs random_obs(const TrunkArch& arch, Rng& rng) {
  EncodedObs o;
  o.priority = uniform01(rng) < 0.5 ? 0.0 : 1.0;
  o.driver_type = uniform(rng, -1.0, 1.0);
  o.local.resize(arch.local_inputs);
  for (double& x : o.local) x = uniform(rng, -1.0, 1.0);
  o.grid.assign(arch.grid_rows * arch.grid_cols, 0.0);
  for (std::size_t r = 0; r < arch.grid_rows; r += 2) {
    for (std::size_t c = 0; c < arch.grid_cols; ++c) {
      if (uniform01(rng) < 0.3) {
        o.grid[r * arch.grid_cols + c] = 1.0;
        o.grid[(r + 1) * arch.grid_cols + c] = uniform(rng, -1.0, 1.0);
      }
    }
  }
  return o;
}

inline ActionMask random_mask(Rng& rng) {
  ActionMask m;
  for (auto&& p : m.permitted) p = uniform01(rng) < 0.6;
  if (!m.any()) m.permit(ActionId::kHardBrake);
  return m;
}

inline int random_permitted(const ActionMask& m, Rng& rng) {
  std::vector<int> allowed;
  for (int i = 0; i < kNumActions; ++i) {
    if (m.permitted[static_cast<std::size_t>(i)]) allowed.push_back(i);
  }
  return allowed[static_cast<std::size_t>(
      uniform_int(rng, 0, static_cast<std::int64_t>(allowed.size()) - 1))];
}

inline GlobalState random_state(std::size_t slots, Rng& rng) {
  GlobalState g;
  g.slots.resize(slots);
  g.present.assign(slots, true);
  for (auto& row : g.slots) {
    for (double& x : row) x = uniform(rng, -1.0, 1.0);
  }
  return g;
}

/// Synthetic on-policy-shaped batch: every agent's action is permitted by its
/// mask; the last record may be terminal.
inline Batch random_batch(const TrunkArch& arch, const QArch& q, Rng& rng) {
  Batch batch;
  const int steps = static_cast<int>(uniform_int(rng, 2, 4));
  for (int t = 0; t < steps; ++t) {
    TransitionRecord rec;
    rec.t = t;
    rec.state = random_state(q.slots, rng);
    rec.next_state = random_state(q.slots, rng);
    rec.joint_action.assign(q.slots, -1);
    rec.next_fixed_actions.assign(q.slots, -1);
    rec.terminal = t == steps - 1 && uniform01(rng) < 0.5;
    const std::size_t n_agents = static_cast<std::size_t>(
        uniform_int(rng, 1, static_cast<std::int64_t>(q.slots)));
    for (std::size_t slot = 0; slot < q.slots; ++slot) {
      if (slot >= n_agents) {
        // A rule-based vehicle occupies the remaining slots.
        rec.joint_action[slot] = static_cast<int>(uniform_int(rng, 0, kNumActions - 1));
        rec.next_fixed_actions[slot] = static_cast<int>(uniform_int(rng, 0, kNumActions - 1));
        continue;
      }
      AgentStep s;
      s.id = static_cast<int>(slot);
      s.slot = slot;
      s.obs = std::make_shared<EncodedObs>(random_obs(arch, rng));
      s.behavior.b_type = s.obs->driver_type * 2.0;
      s.mask = random_mask(rng);
      s.action = random_permitted(s.mask, rng);
      s.reward = uniform(rng, -5.0, 5.0);
      s.terminal = rec.terminal || uniform01(rng) < 0.2;
      rec.joint_action[slot] = s.action;
      rec.joint_reward += s.reward;
      if (!s.terminal) {
        s.next_obs = std::make_shared<EncodedObs>(random_obs(arch, rng));
        if (!rec.terminal) rec.next_agents.push_back({slot, s.next_obs, random_mask(rng)});
      }
      rec.agents.push_back(std::move(s));
    }
    batch.push_back(std::move(rec));
  }
  return batch;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a rectifier kink
};

/// Relative error with an absolute floor: |a - n| / max(|a|, |n|, floor).
inline double rel_error(double a, double n, double floor = 1e-4) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

/// Compares `analytic` against central differences of `f` over every entry
/// of `params`.
inline GradCheck gradcheck(nn::ParamSet& params, const nn::Gradients& analytic,
                           const std::function<double()>& f, double eps = 1e-6) {
  GradCheck out;
  std::vector<std::uint8_t> base;
  {
    nn::ReluTrace trace;
    f();
    base = trace.pattern();
  }
  for (std::size_t i = 0; i < params.numel(); ++i) {
    double& x = params.flat(i);
    const double x0 = x;
    double fp, fm;
    bool same = true;
    {
      nn::ReluTrace trace;
      x = x0 + eps;
      fp = f();
      same = same && trace.pattern() == base;
    }
    {
      nn::ReluTrace trace;
      x = x0 - eps;
      fm = f();
      same = same && trace.pattern() == base;
    }
    x = x0;
    if (!same) {
      ++out.skipped;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * eps);
    out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic.flat(i), numeric));
    ++out.checked;
  }
  return out;
}

/// sum_{a'} pi(a') Q(s, (a^{-slot}, a')) by direct evaluation of every
/// substituted joint action.
inline double brute_force_baseline(const QNet& q, const GlobalState& state,
                                   const SlotActions& joint, std::size_t slot,
                                   const std::array<double, kNumActions>& pi) {
  double b = 0.0;
  for (int a = 0; a < kNumActions; ++a) {
    if (pi[static_cast<std::size_t>(a)] == 0.0) continue;
    SlotActions sub = joint;
    sub[slot] = a;
    b += pi[static_cast<std::size_t>(a)] * q_forward(q, state, sub);
  }
  return b;
}

}  // namespace idas::testing
