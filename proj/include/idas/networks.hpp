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

// Policy, decentralized-critic and centralized-critic networks.
//
// The policy and the decentralized critic share one trunk layout:
//
//   priority      -> fc1 (32)
//   driver type   -> fc2 (32)
//   local state   -> fc3 (32)
//   lane grids    -> conv 2x(3x30), stride 1
//   concat(all four) -> fc4 (64) -> fc5 (64) -> fc6 (64) -> head
//
// The grid input is a 4 x 400 image whose rows are (own-lane occupancy,
// own-lane relative speed, other-lane occupancy, other-lane relative speed).
// The centralized critic is an MLP over all agent slots with two 128-unit
// hidden layers.

#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "idas/masking.hpp"
#include "idas/nn.hpp"
#include "idas/observation.hpp"

namespace idas {

struct TrunkArch {
  std::size_t local_inputs = 4;
  std::size_t branch_units = 32;
  std::size_t grid_rows = 4;
  std::size_t grid_cols = kGridCells;
  std::size_t kernel_rows = 3;
  std::size_t kernel_cols = 30;
  std::size_t filters = 2;
  std::size_t hidden = 64;
  std::size_t outputs = kNumActions;

  std::size_t conv_rows() const { return grid_rows - kernel_rows + 1; }
  std::size_t conv_cols() const { return grid_cols - kernel_cols + 1; }
  std::size_t conv_size() const { return filters * conv_rows() * conv_cols(); }
  std::size_t concat_size() const { return 3 * branch_units + conv_size(); }
  void validate() const;
};

/// Network input for one agent: scaled scalar features plus the grid image.
struct EncodedObs {
  double priority = 0.0;
  double driver_type = 0.0;
  std::vector<double> local;  // arch.local_inputs entries
  std::vector<double> grid;   // grid_rows x grid_cols, row-major
};

/// Feature scaling applied before the network sees an observation.
EncodedObs encode_observation(const AgentObservation& obs);

struct TrunkCache {
  std::vector<double> concat;  // post-activation branch and conv outputs
  std::vector<double> h4, h5, h6;
  std::vector<double> out;
};

class TrunkNet {
 public:
  TrunkNet() = default;
  TrunkNet(std::string prefix, const TrunkArch& arch, Rng& rng);

  const TrunkArch& arch() const { return arch_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  std::span<const double> forward(const EncodedObs& x, TrunkCache& cache) const;
  /// Accumulates d(out . dout)/d(params) into `grads`.
  void backward(const EncodedObs& x, const TrunkCache& cache, std::span<const double> dout,
                nn::Gradients& grads) const;

 private:
  void check_input(const EncodedObs& x) const;

  TrunkArch arch_;
  nn::ParamSet params_;
  enum Block : std::size_t {
    kFc1W, kFc1B, kFc2W, kFc2B, kFc3W, kFc3B, kConvW, kConvB,
    kFc4W, kFc4B, kFc5W, kFc5B, kFc6W, kFc6B, kHeadW, kHeadB,
  };
};

using PolicyNet = TrunkNet;
using ValueNet = TrunkNet;

/// Masked softmax: forbidden entries get exactly zero probability.
std::array<double, kNumActions> masked_softmax(std::span<const double> logits,
                                               const ActionMask& mask);

std::array<double, kNumActions> policy_forward(const PolicyNet& net, const EncodedObs& obs,
                                               const ActionMask& mask);
std::array<double, kNumActions> policy_forward(const PolicyNet& net,
                                               const AgentObservation& obs,
                                               const ActionMask& mask);
double v_forward(const ValueNet& net, const EncodedObs& obs);

// Centralized critic input: per slot (lane, d, v, a, b_prio, b_type) plus a
// one-hot action; absent agents are all zeros.
inline constexpr std::size_t kSlotStateFeatures = 6;
inline constexpr std::size_t kSlotFeatures = kSlotStateFeatures + kNumActions;
inline constexpr std::size_t kDefaultSlots = 8;

struct QArch {
  std::size_t slots = kDefaultSlots;
  std::size_t hidden = 128;
  std::size_t input_size() const { return slots * kSlotFeatures; }
};

/// Per-slot state features, without actions. Slots of absent agents are
/// marked absent.
struct GlobalState {
  std::vector<std::array<double, kSlotStateFeatures>> slots;
  std::vector<bool> present;
};

/// Joint action by slot; -1 marks a slot with no acting agent.
using SlotActions = std::vector<int>;

GlobalState encode_global_state(const WorldState& world, std::size_t slots);

struct QCache {
  std::vector<double> input;
  std::vector<double> h1, h2;
  double out = 0.0;
};

class QNet {
 public:
  QNet() = default;
  QNet(std::string prefix, const QArch& arch, Rng& rng);

  const QArch& arch() const { return arch_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  std::vector<double> make_input(const GlobalState& state, const SlotActions& actions) const;
  double forward(const std::vector<double>& input, QCache& cache) const;
  void backward(const QCache& cache, double dout, nn::Gradients& grads) const;

  /// Q(s, (a^{-slot}, a')) for every a'. Only the first layer depends on the
  /// substituted action, so its shared part is computed once.
  std::array<double, kNumActions> action_values(const GlobalState& state,
                                                const SlotActions& joint,
                                                std::size_t slot) const;

 private:
  QArch arch_;
  nn::ParamSet params_;
  enum Block : std::size_t { kFc1W, kFc1B, kFc2W, kFc2B, kOutW, kOutB };
};

/// Q(s, a, b); behaviors are part of the slot features.
double q_forward(const QNet& net, const GlobalState& state, const SlotActions& actions);

}  // namespace idas
