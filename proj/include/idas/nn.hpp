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

// Minimal tensor/parameter machinery: named parameter blocks, dense layer
// kernels with hand-written reverse passes, and the optimizers.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "idas/common.hpp"

namespace idas::nn {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims);

  std::size_t numel() const { return data.size(); }
  bool operator==(const Tensor&) const = default;
};

struct ParamBlock {
  std::string name;
  Tensor value;
  bool operator==(const ParamBlock&) const = default;
};

/// Ordered collection of named tensors. Gradients and optimizer moments use
/// the same layout as the parameters they belong to.
class ParamSet {
 public:
  std::size_t add(std::string name, std::vector<std::size_t> shape);

  Tensor& operator[](std::size_t i) { return blocks_[i].value; }
  const Tensor& operator[](std::size_t i) const { return blocks_[i].value; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  std::vector<ParamBlock>& blocks() { return blocks_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::size_t size() const { return blocks_.size(); }
  std::size_t numel() const;

  ParamSet zeros_like() const;
  void fill(double value);
  void scale(double factor);
  /// this += alpha * other (same layout).
  void axpy(double alpha, const ParamSet& other);
  bool same_layout(const ParamSet& other) const;
  /// Sum of squares of all entries.
  double squared_norm() const;

  /// Flat element access across blocks, in block order.
  double& flat(std::size_t i);
  double flat(std::size_t i) const;

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<ParamBlock> blocks_;
};

using Gradients = ParamSet;

/// Glorot-uniform fill of a [out, in...] weight with the given fans.
void glorot_uniform(Tensor& w, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Dense kernels; `w` is row-major [out, in].
void dense_forward(const Tensor& w, const Tensor& b, std::span<const double> x,
                   std::span<double> y);
/// dW += dy x^T, db += dy, and (if `dx` is non-empty) dx = W^T dy.
void dense_backward(const Tensor& w, std::span<const double> x, std::span<const double> dy,
                    Tensor& dw, Tensor& db, std::span<double> dx);

/// In-place rectifier. Records the activation pattern when a trace is active.
void relu_inplace(std::span<double> x);
/// dx *= 1[y > 0] for post-activation values y.
void relu_backward(std::span<const double> y, std::span<double> dx);

/// While alive, every relu_inplace call on this thread appends its pattern.
/// Finite-difference checks use it to skip points where a perturbation
/// crosses a rectifier kink.
class ReluTrace {
 public:
  ReluTrace();
  ~ReluTrace();
  ReluTrace(const ReluTrace&) = delete;
  ReluTrace& operator=(const ReluTrace&) = delete;
  const std::vector<std::uint8_t>& pattern() const { return pattern_; }

 private:
  std::vector<std::uint8_t> pattern_;
  std::vector<std::uint8_t>* previous_;
};

enum class OptimizerKind { kAdam, kSgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  ParamSet m;
  ParamSet v;
  std::uint64_t step = 0;

  static OptimizerState for_params(const ParamSet& params);
  bool operator==(const OptimizerState&) const = default;
};

/// One descent step on `params` along `grads` (gradient of a loss to be
/// minimized). Throws NonFiniteError naming the first bad entry.
void optimize_step(ParamSet& params, const Gradients& grads, OptimizerState& state,
                   const OptimizerConfig& config);

/// target = (1 - tau) target + tau online.
void soft_update(ParamSet& target, const ParamSet& online, double tau);

/// Throws NonFiniteError naming the first non-finite entry.
void check_finite(const ParamSet& set, const std::string& what);

}  // namespace idas::nn
