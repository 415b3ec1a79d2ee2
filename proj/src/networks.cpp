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

#include "idas/networks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace idas {

namespace {

constexpr double kSpeedScale = 20.0;
constexpr double kAccelScale = 4.0;
constexpr double kDistScale = 150.0;
constexpr double kRelSpeedScale = 10.0;

std::span<double> sub(std::vector<double>& v, std::size_t off, std::size_t n) {
  return std::span<double>(v).subspan(off, n);
}
std::span<const double> sub(const std::vector<double>& v, std::size_t off, std::size_t n) {
  return std::span<const double>(v).subspan(off, n);
}

}  // namespace

void TrunkArch::validate() const {
  if (kernel_rows > grid_rows || kernel_cols > grid_cols) {
    throw Error("trunk: kernel larger than grid");
  }
  if (branch_units == 0 || hidden == 0 || filters == 0 || outputs == 0) {
    throw Error("trunk: layer sizes must be positive");
  }
}

EncodedObs encode_observation(const AgentObservation& obs) {
  EncodedObs x;
  x.priority = obs.priority;
  x.driver_type = obs.driver_type / 2.0;
  x.local = {obs.v / kSpeedScale, obs.a / kAccelScale, obs.dist_to_merge / kDistScale,
             obs.post_brake ? 1.0 : 0.0};
  x.grid.resize(4 * kGridCells);
  const std::array<const std::array<double, kGridCells>*, 4> rows = {
      &obs.obs_cl.occupancy, &obs.obs_cl.rel_speed, &obs.obs_ol.occupancy,
      &obs.obs_ol.rel_speed};
  for (std::size_t r = 0; r < 4; ++r) {
    const double scale = (r % 2 == 0) ? 1.0 : 1.0 / kRelSpeedScale;
    for (std::size_t c = 0; c < kGridCells; ++c) {
      x.grid[r * kGridCells + c] = (*rows[r])[c] * scale;
    }
  }
  return x;
}

TrunkNet::TrunkNet(std::string prefix, const TrunkArch& arch, Rng& rng) : arch_(arch) {
  arch_.validate();
  const std::size_t B = arch.branch_units;
  const std::size_t H = arch.hidden;
  auto dense = [&](const std::string& name, std::size_t out, std::size_t in) {
    const std::size_t w = params_.add(prefix + "." + name + ".w", {out, in});
    params_.add(prefix + "." + name + ".b", {out});
    nn::glorot_uniform(params_[w], in, out, rng);
  };
  dense("fc1", B, 1);
  dense("fc2", B, 1);
  dense("fc3", B, arch.local_inputs);
  const std::size_t kw =
      params_.add(prefix + ".conv.w", {arch.filters, arch.kernel_rows, arch.kernel_cols});
  params_.add(prefix + ".conv.b", {arch.filters});
  const std::size_t receptive = arch.kernel_rows * arch.kernel_cols;
  nn::glorot_uniform(params_[kw], receptive, arch.filters * receptive, rng);
  dense("fc4", H, arch.concat_size());
  dense("fc5", H, H);
  dense("fc6", H, H);
  dense("head", arch.outputs, H);
}

void TrunkNet::check_input(const EncodedObs& x) const {
  if (x.local.size() != arch_.local_inputs ||
      x.grid.size() != arch_.grid_rows * arch_.grid_cols) {
    throw Error("trunk: input shape does not match architecture");
  }
}

std::span<const double> TrunkNet::forward(const EncodedObs& x, TrunkCache& cache) const {
  check_input(x);
  const TrunkArch& a = arch_;
  const std::size_t B = a.branch_units;
  cache.concat.assign(a.concat_size(), 0.0);
  cache.h4.resize(a.hidden);
  cache.h5.resize(a.hidden);
  cache.h6.resize(a.hidden);
  cache.out.resize(a.outputs);

  const double prio[1] = {x.priority};
  const double type[1] = {x.driver_type};
  nn::dense_forward(params_[kFc1W], params_[kFc1B], prio, sub(cache.concat, 0, B));
  nn::dense_forward(params_[kFc2W], params_[kFc2B], type, sub(cache.concat, B, B));
  nn::dense_forward(params_[kFc3W], params_[kFc3B], x.local, sub(cache.concat, 2 * B, B));

  // Convolution, scattered from the non-zero grid entries (the grids are
  // mostly empty road).
  const std::size_t orows = a.conv_rows();
  const std::size_t ocols = a.conv_cols();
  const std::size_t kr = a.kernel_rows;
  const std::size_t kc = a.kernel_cols;
  std::span<double> conv = sub(cache.concat, 3 * B, a.conv_size());
  const auto& kw = params_[kConvW].data;
  const auto& kb = params_[kConvB].data;
  for (std::size_t f = 0; f < a.filters; ++f) {
    std::fill_n(conv.begin() + static_cast<std::ptrdiff_t>(f * orows * ocols), orows * ocols,
                kb[f]);
  }
  for (std::size_t i = 0; i < a.grid_rows; ++i) {
    for (std::size_t j = 0; j < a.grid_cols; ++j) {
      const double xv = x.grid[i * a.grid_cols + j];
      if (xv == 0.0) continue;
      const std::size_t dr_lo = i >= orows ? i - orows + 1 : 0;
      const std::size_t dr_hi = std::min(kr - 1, i);
      const std::size_t dc_lo = j >= ocols ? j - ocols + 1 : 0;
      const std::size_t dc_hi = std::min(kc - 1, j);
      for (std::size_t f = 0; f < a.filters; ++f) {
        for (std::size_t dr = dr_lo; dr <= dr_hi; ++dr) {
          const double* krow = &kw[(f * kr + dr) * kc];
          double* orow = &conv[(f * orows + (i - dr)) * ocols];
          for (std::size_t dc = dc_lo; dc <= dc_hi; ++dc) orow[j - dc] += krow[dc] * xv;
        }
      }
    }
  }
  nn::relu_inplace(cache.concat);

  nn::dense_forward(params_[kFc4W], params_[kFc4B], cache.concat, cache.h4);
  nn::relu_inplace(cache.h4);
  nn::dense_forward(params_[kFc5W], params_[kFc5B], cache.h4, cache.h5);
  nn::relu_inplace(cache.h5);
  nn::dense_forward(params_[kFc6W], params_[kFc6B], cache.h5, cache.h6);
  nn::relu_inplace(cache.h6);
  nn::dense_forward(params_[kHeadW], params_[kHeadB], cache.h6, cache.out);
  return cache.out;
}

void TrunkNet::backward(const EncodedObs& x, const TrunkCache& cache,
                        std::span<const double> dout, nn::Gradients& grads) const {
  const TrunkArch& a = arch_;
  const std::size_t B = a.branch_units;
  std::vector<double> d6(a.hidden), d5(a.hidden), d4(a.hidden), dcat(a.concat_size());

  nn::dense_backward(params_[kHeadW], cache.h6, dout, grads[kHeadW], grads[kHeadB], d6);
  nn::relu_backward(cache.h6, d6);
  nn::dense_backward(params_[kFc6W], cache.h5, d6, grads[kFc6W], grads[kFc6B], d5);
  nn::relu_backward(cache.h5, d5);
  nn::dense_backward(params_[kFc5W], cache.h4, d5, grads[kFc5W], grads[kFc5B], d4);
  nn::relu_backward(cache.h4, d4);
  nn::dense_backward(params_[kFc4W], cache.concat, d4, grads[kFc4W], grads[kFc4B], dcat);
  nn::relu_backward(cache.concat, dcat);

  const double prio[1] = {x.priority};
  const double type[1] = {x.driver_type};
  nn::dense_backward(params_[kFc1W], prio, sub(dcat, 0, B), grads[kFc1W], grads[kFc1B], {});
  nn::dense_backward(params_[kFc2W], type, sub(dcat, B, B), grads[kFc2W], grads[kFc2B], {});
  nn::dense_backward(params_[kFc3W], x.local, sub(dcat, 2 * B, B), grads[kFc3W], grads[kFc3B],
                     {});

  const std::size_t orows = a.conv_rows();
  const std::size_t ocols = a.conv_cols();
  const std::size_t kr = a.kernel_rows;
  const std::size_t kc = a.kernel_cols;
  std::span<const double> dconv = sub(std::as_const(dcat), 3 * B, a.conv_size());
  auto& gw = grads[kConvW].data;
  auto& gb = grads[kConvB].data;
  for (std::size_t f = 0; f < a.filters; ++f) {
    double s = 0.0;
    for (std::size_t k = 0; k < orows * ocols; ++k) s += dconv[f * orows * ocols + k];
    gb[f] += s;
  }
  for (std::size_t i = 0; i < a.grid_rows; ++i) {
    for (std::size_t j = 0; j < a.grid_cols; ++j) {
      const double xv = x.grid[i * a.grid_cols + j];
      if (xv == 0.0) continue;
      const std::size_t dr_lo = i >= orows ? i - orows + 1 : 0;
      const std::size_t dr_hi = std::min(kr - 1, i);
      const std::size_t dc_lo = j >= ocols ? j - ocols + 1 : 0;
      const std::size_t dc_hi = std::min(kc - 1, j);
      for (std::size_t f = 0; f < a.filters; ++f) {
        for (std::size_t dr = dr_lo; dr <= dr_hi; ++dr) {
          double* grow = &gw[(f * kr + dr) * kc];
          const double* drow = &dconv[(f * orows + (i - dr)) * ocols];
          for (std::size_t dc = dc_lo; dc <= dc_hi; ++dc) grow[dc] += drow[j - dc] * xv;
        }
      }
    }
  }
}

std::array<double, kNumActions> masked_softmax(std::span<const double> logits,
                                               const ActionMask& mask) {
  if (!mask.any()) throw Error("masked_softmax: every action is forbidden");
  std::array<double, kNumActions> p{};
  double max_logit = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kNumActions; ++i) {
    if (mask.permitted[static_cast<std::size_t>(i)]) {
      max_logit = std::max(max_logit, logits[static_cast<std::size_t>(i)]);
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!mask.permitted[i]) continue;
    p[i] = std::exp(logits[i] - max_logit);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

std::array<double, kNumActions> policy_forward(const PolicyNet& net, const EncodedObs& obs,
                                               const ActionMask& mask) {
  TrunkCache cache;
  return masked_softmax(net.forward(obs, cache), mask);
}

std::array<double, kNumActions> policy_forward(const PolicyNet& net,
                                               const AgentObservation& obs,
                                               const ActionMask& mask) {
  return policy_forward(net, encode_observation(obs), mask);
}

double v_forward(const ValueNet& net, const EncodedObs& obs) {
  TrunkCache cache;
  return net.forward(obs, cache)[0];
}

GlobalState encode_global_state(const WorldState& world, std::size_t slots) {
  GlobalState g;
  g.slots.assign(slots, {});
  g.present.assign(slots, false);
  for (const VehicleState& v : world.vehicles) {
    const auto slot = static_cast<std::size_t>(v.id);
    if (slot >= slots || !v.active) continue;
    g.present[slot] = true;
    g.slots[slot] = {static_cast<double>(v.lane), path_coordinate(v, world.road) / kDistScale,
                     v.v / kSpeedScale, v.a / kAccelScale,
                     static_cast<double>(v.behavior.b_prio), v.behavior.b_type / 2.0};
  }
  return g;
}

QNet::QNet(std::string prefix, const QArch& arch, Rng& rng) : arch_(arch) {
  auto dense = [&](const std::string& name, std::size_t out, std::size_t in) {
    const std::size_t w = params_.add(prefix + "." + name + ".w", {out, in});
    params_.add(prefix + "." + name + ".b", {out});
    nn::glorot_uniform(params_[w], in, out, rng);
  };
  dense("fc1", arch.hidden, arch.input_size());
  dense("fc2", arch.hidden, arch.hidden);
  dense("out", 1, arch.hidden);
}

std::vector<double> QNet::make_input(const GlobalState& state, const SlotActions& actions) const {
  if (state.slots.size() != arch_.slots || actions.size() != arch_.slots) {
    throw Error("q: slot count does not match architecture");
  }
  std::vector<double> x(arch_.input_size(), 0.0);
  for (std::size_t s = 0; s < arch_.slots; ++s) {
    if (!state.present[s]) continue;
    double* row = &x[s * kSlotFeatures];
    std::copy(state.slots[s].begin(), state.slots[s].end(), row);
    if (actions[s] >= 0) row[kSlotStateFeatures + static_cast<std::size_t>(actions[s])] = 1.0;
  }
  return x;
}

double QNet::forward(const std::vector<double>& input, QCache& cache) const {
  if (input.size() != arch_.input_size()) throw Error("q: input size mismatch");
  cache.input = input;
  cache.h1.resize(arch_.hidden);
  cache.h2.resize(arch_.hidden);
  nn::dense_forward(params_[kFc1W], params_[kFc1B], cache.input, cache.h1);
  nn::relu_inplace(cache.h1);
  nn::dense_forward(params_[kFc2W], params_[kFc2B], cache.h1, cache.h2);
  nn::relu_inplace(cache.h2);
  double out[1];
  nn::dense_forward(params_[kOutW], params_[kOutB], cache.h2, out);
  cache.out = out[0];
  return cache.out;
}

void QNet::backward(const QCache& cache, double dout, nn::Gradients& grads) const {
  std::vector<double> d2(arch_.hidden), d1(arch_.hidden);
  const double g[1] = {dout};
  nn::dense_backward(params_[kOutW], cache.h2, g, grads[kOutW], grads[kOutB], d2);
  nn::relu_backward(cache.h2, d2);
  nn::dense_backward(params_[kFc2W], cache.h1, d2, grads[kFc2W], grads[kFc2B], d1);
  nn::relu_backward(cache.h1, d1);
  nn::dense_backward(params_[kFc1W], cache.input, d1, grads[kFc1W], grads[kFc1B], {});
}

std::array<double, kNumActions> QNet::action_values(const GlobalState& state,
                                                   const SlotActions& joint,
                                                   std::size_t slot) const {
  if (slot >= arch_.slots || !state.present[slot]) {
    throw Error("q: substituted slot holds no agent");
  }
  SlotActions others = joint;
  others[slot] = -1;
  const std::vector<double> x = make_input(state, others);
  const std::size_t H = arch_.hidden;
  const std::size_t in = arch_.input_size();
  std::vector<double> base(H), h1(H), h2(H);
  nn::dense_forward(params_[kFc1W], params_[kFc1B], x, base);
  const auto& w1 = params_[kFc1W].data;
  std::array<double, kNumActions> out{};
  for (std::size_t a = 0; a < static_cast<std::size_t>(kNumActions); ++a) {
    const std::size_t col = slot * kSlotFeatures + kSlotStateFeatures + a;
    for (std::size_t o = 0; o < H; ++o) h1[o] = base[o] + w1[o * in + col];
    nn::relu_inplace(h1);
    nn::dense_forward(params_[kFc2W], params_[kFc2B], h1, h2);
    nn::relu_inplace(h2);
    double y[1];
    nn::dense_forward(params_[kOutW], params_[kOutB], h2, y);
    out[a] = y[0];
  }
  return out;
}

double q_forward(const QNet& net, const GlobalState& state, const SlotActions& actions) {
  QCache cache;
  return net.forward(net.make_input(state, actions), cache);
}

}  // namespace idas
