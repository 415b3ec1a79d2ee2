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

#include "idas/nn.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace idas::nn {

namespace {

thread_local std::vector<std::uint8_t>* g_relu_trace = nullptr;

// Four independent accumulators; the summation order is fixed, so results
// stay deterministic.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims) : shape(std::move(dims)) {
  const std::size_t n =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  data.assign(n, 0.0);
}

std::size_t ParamSet::add(std::string name, std::vector<std::size_t> shape) {
  blocks_.push_back({std::move(name), Tensor(std::move(shape))});
  return blocks_.size() - 1;
}

const Tensor& ParamSet::at(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b.value;
  }
  throw Error("no parameter block named '" + name + "'");
}

Tensor& ParamSet::at(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParamSet&>(*this).at(name));
}

std::size_t ParamSet::numel() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.value.numel();
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& b : blocks_) out.add(b.name, b.value.shape);
  return out;
}

void ParamSet::fill(double value) {
  for (auto& b : blocks_) std::fill(b.value.data.begin(), b.value.data.end(), value);
}

void ParamSet::scale(double factor) {
  for (auto& b : blocks_) {
    for (double& x : b.value.data) x *= factor;
  }
}

void ParamSet::axpy(double alpha, const ParamSet& other) {
  if (!same_layout(other)) throw Error("axpy: parameter layouts differ");
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    auto& dst = blocks_[k].value.data;
    const auto& src = other.blocks_[k].value.data;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += alpha * src[i];
  }
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    if (blocks_[k].value.shape != other.blocks_[k].value.shape) return false;
  }
  return true;
}

double ParamSet::squared_norm() const {
  double s = 0.0;
  for (const auto& b : blocks_) {
    for (double x : b.value.data) s += x * x;
  }
  return s;
}

double& ParamSet::flat(std::size_t i) {
  for (auto& b : blocks_) {
    if (i < b.value.numel()) return b.value.data[i];
    i -= b.value.numel();
  }
  throw Error("flat index out of range");
}

double ParamSet::flat(std::size_t i) const { return const_cast<ParamSet&>(*this).flat(i); }

void glorot_uniform(Tensor& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : w.data) x = uniform(rng, -limit, limit);
}

void dense_forward(const Tensor& w, const Tensor& b, std::span<const double> x,
                   std::span<double> y) {
  const std::size_t out = w.shape[0];
  const std::size_t in = w.shape[1];
  for (std::size_t o = 0; o < out; ++o) {
    y[o] = b.data[o] + dot(&w.data[o * in], x.data(), in);
  }
}

void dense_backward(const Tensor& w, std::span<const double> x, std::span<const double> dy,
                    Tensor& dw, Tensor& db, std::span<double> dx) {
  const std::size_t out = w.shape[0];
  const std::size_t in = w.shape[1];
  if (!dx.empty()) std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    const double g = dy[o];
    if (g == 0.0) continue;
    db.data[o] += g;
    double* dwr = &dw.data[o * in];
    for (std::size_t i = 0; i < in; ++i) dwr[i] += g * x[i];
    if (!dx.empty()) {
      const double* wr = &w.data[o * in];
      for (std::size_t i = 0; i < in; ++i) dx[i] += g * wr[i];
    }
  }
}

void relu_inplace(std::span<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
  if (g_relu_trace) {
    for (double v : x) g_relu_trace->push_back(v > 0.0 ? 1 : 0);
  }
}

void relu_backward(std::span<const double> y, std::span<double> dx) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0)) dx[i] = 0.0;
  }
}

ReluTrace::ReluTrace() : previous_(g_relu_trace) { g_relu_trace = &pattern_; }
ReluTrace::~ReluTrace() { g_relu_trace = previous_; }

OptimizerState OptimizerState::for_params(const ParamSet& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void check_finite(const ParamSet& set, const std::string& what) {
  for (const auto& b : set.blocks()) {
    for (std::size_t i = 0; i < b.value.numel(); ++i) {
      if (!std::isfinite(b.value.data[i])) {
        throw NonFiniteError(what + ": non-finite value in block '" + b.name + "' at index " +
                             std::to_string(i));
      }
    }
  }
}

void optimize_step(ParamSet& params, const Gradients& grads, OptimizerState& state,
                   const OptimizerConfig& config) {
  if (!params.same_layout(grads)) throw Error("optimize_step: gradient layout mismatch");
  check_finite(grads, "optimize_step gradients");
  if (config.kind == OptimizerKind::kSgd) {
    params.axpy(-config.lr, grads);
    ++state.step;
    return;
  }
  if (state.m.size() == 0) state = OptimizerState::for_params(params);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k].data;
    const auto& g = grads[k].data;
    auto& m = state.m[k].data;
    auto& v = state.v[k].data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

void soft_update(ParamSet& target, const ParamSet& online, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw Error("soft_update: tau must lie in (0, 1]");
  if (!target.same_layout(online)) throw Error("soft_update: layout mismatch");
  for (std::size_t k = 0; k < target.size(); ++k) {
    auto& t = target[k].data;
    const auto& o = online[k].data;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - tau) * t[i] + tau * o[i];
  }
}

}  // namespace idas::nn
