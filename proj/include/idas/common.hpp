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

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace idas {

/// Raised when inputs violate a documented precondition (bad scenario, bad
/// config, malformed file). Carries a human-readable diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a caller breaks an API contract that upstream code is
/// supposed to guarantee (e.g. releasing a brake that was never applied).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when a loss or gradient stops being finite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Road and vehicle constants.
inline constexpr double kStepSeconds = 0.2;
inline constexpr double kLaneLength = 250.0;
inline constexpr double kMergePoint = 150.0;
inline constexpr double kVehicleLength = 4.0;
inline constexpr double kMinGap = 2.0;
inline constexpr double kMergingZoneRadius = 50.0;
inline constexpr double kSpeedExemptionRadius = 100.0;
inline constexpr double kMainLaneSpeedLimit = 20.0;
inline constexpr double kMergeLaneSpeedLimit = 15.0;

// Acceleration envelope.
inline constexpr double kMaxAccel = 2.0;
inline constexpr double kMinAccel = -2.0;
inline constexpr double kHardBrakeAccel = -4.0;

inline constexpr int kNumActions = 7;

enum class ActionId : std::uint8_t {
  kDec2 = 0,
  kDec1 = 1,
  kKeep = 2,
  kAcc1 = 3,
  kAcc2 = 4,
  kHardBrake = 5,
  kReleaseBrake = 6,
};

inline constexpr std::array<double, 5> kDeltaAccel = {-0.2, -0.1, 0.0, 0.1, 0.2};

inline constexpr bool is_delta_action(ActionId a) {
  return static_cast<int>(a) < 5;
}

inline constexpr int index_of(ActionId a) { return static_cast<int>(a); }

inline constexpr ActionId action_from_index(int i) {
  return static_cast<ActionId>(i);
}

std::string_view action_name(ActionId a);
ActionId parse_action(std::string_view name);

/// Engine used for every stochastic decision. mt19937_64 is fully specified by
/// the standard, unlike the distributions, so draws go through the helpers
/// below to stay bit-reproducible across standard libraries.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [lo, hi] (inclusive).
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(span));
}

/// Derives an independent stream seed (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace idas
