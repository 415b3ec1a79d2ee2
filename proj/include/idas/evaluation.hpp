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

// Evaluation protocol: the randomized benchmark with one ego vehicle per
// scenario, the two-vehicle representative scene families, and the
// driver-type sweep of the merging vehicle.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "idas/rollout.hpp"

namespace idas {

enum class Method { kIdas, kIdasV, kIdasDirect, kIdm, kFsmIdm, kRandom };

std::string_view method_name(Method m);
/// Throws Error listing the valid names.
Method parse_method(std::string_view name);
bool is_learned(Method m);
const std::vector<Method>& benchmark_methods();

/// Networks available to the benchmark. `idas` also drives all non-ego
/// vehicles, so it is always required.
struct PolicySet {
  const PolicyNet* idas = nullptr;
  const PolicyNet* idas_v = nullptr;
  const PolicyNet* idas_direct = nullptr;

  const PolicyNet* for_method(Method m) const;
};

struct BenchmarkConfig {
  std::vector<Method> methods = {Method::kIdas, Method::kIdm};
  int scenarios = 100;
  std::uint64_t seed = 0;
  int min_agents = 2;
  int max_agents = 8;
  double entry_window_s = 10.0;
  double preplace_fraction = 0.5;
  double max_initial_s = 100.0;
  double equal_priority_prob = 0.1;
  int max_steps = 600;
  int workers = 1;
  PolicyMode ego_mode = PolicyMode::kGreedy;  // learned egos only
};

struct ScenarioOutcome {
  Method method = Method::kIdas;
  std::string scene;  // "random" or a family tag
  int scenario = 0;
  std::uint64_t seed = 0;
  int ego = 0;
  int agents = 0;
  bool success = false;
  bool perfect = false;
  std::map<int, double> rewards;       // episode reward per vehicle
  std::map<int, double> finish_times;  // entry to finish, finished vehicles only
  std::map<int, double> avg_speeds;    // distance covered / time, finished vehicles
  int steps = 0;
};

struct EvalMetrics {
  Method method = Method::kIdas;
  int scenarios = 0;
  double success_rate = 0.0;          // percent
  double perfect_success_rate = 0.0;  // percent
  double avg_speed = 0.0;             // over perfect scenarios; NaN if none
  double normalized_reward = 0.0;     // mean over scenarios
  double avg_finish_time = 0.0;       // ego, successful scenarios; NaN if none
};

/// Scenario `index` of the benchmark seed set (all vehicles policy-driven).
ScenarioSpec benchmark_scenario(const BenchmarkConfig& config, int index);
/// Ego vehicle designated for a scenario.
int benchmark_ego(const ScenarioSpec& spec, std::uint64_t seed);

/// Runs one scenario with `ego` under `method` and everyone else under IDAS.
/// Learned egos act in `ego_mode`; other IDAS vehicles sample with a
/// per-scenario seed.
ScenarioOutcome run_scenario(const ScenarioSpec& spec, int ego, Method method,
                             const PolicySet& policies, std::uint64_t seed, int max_steps,
                             EpisodeResult* episode = nullptr,
                             PolicyMode ego_mode = PolicyMode::kGreedy);

std::vector<ScenarioOutcome> run_benchmark(const BenchmarkConfig& config,
                                           const PolicySet& policies);

/// Sum of episode rewards / (agents * 20).
double normalized_reward(const ScenarioOutcome& o);
std::vector<EvalMetrics> summarize(const std::vector<ScenarioOutcome>& outcomes);

// ---- representative scenes ----

enum class SceneFamily { kS1, kS2, kS3, kS4 };

std::string_view family_name(SceneFamily f);
SceneFamily parse_family(std::string_view name);

inline constexpr double kSceneTimeBound = 2.0;  // s, bound on |t_mpt^1 - t_mpt^2|

/// No-interaction arrival time at the merge point at constant speed.
double time_to_merge_point(double s, double v, const RoadNetwork& road);

/// Two vehicles, vehicle 0 on lane 0 and vehicle 1 on lane 1, both
/// policy-driven and present at t = 0.
ScenarioSpec build_scene(SceneFamily family, std::uint64_t seed);

/// Runs `count` scenes of one family under each method. Both vehicles use
/// the method, except that FSM+IDM only drives the lane-0 vehicle and the
/// other runs IDAS. When `trajectories` is given, one trajectory per outcome
/// is appended to it.
std::vector<ScenarioOutcome> run_scene_family(
    SceneFamily family, int count, std::uint64_t seed, const std::vector<Method>& methods,
    const PolicySet& policies, int max_steps,
    std::vector<std::vector<TrajectoryRow>>* trajectories = nullptr);

// ---- driver-type sweep ----

struct SweepConfig {
  std::vector<double> grid;  // merging vehicle b_type values
  int repetitions = 20;
  std::uint64_t seed = 0;
  int max_steps = 600;
  int bootstrap_samples = 1000;
  /// Default: 9 points evenly spaced over [-2, 2].
  static std::vector<double> default_grid();
};

struct SweepPoint {
  double b_type = 0.0;
  std::vector<double> merge_times;       // one per repetition that merged
  std::vector<double> repetition_times;  // one per repetition, NaN if it failed
  int failures = 0;                      // repetitions without a clean merge
  double mean_merge_time = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double spearman_rho = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

inline constexpr double kSweepMainLaneType = -1.0;

/// Base scene for the sweep: equal arrival times, merging vehicle on lane 1,
/// main-lane vehicle of driver type kSweepMainLaneType.
ScenarioSpec sweep_base_scene(std::uint64_t seed);

SweepResult driver_type_sweep(const PolicyNet& policy, const ScenarioSpec& base,
                              const SweepConfig& config,
                              std::vector<std::vector<TrajectoryRow>>* profiles = nullptr);

/// Spearman rank correlation with average ranks for ties; NaN when either
/// side is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// ---- persistence ----

void write_benchmark_csv(const std::filesystem::path& path,
                         const std::vector<ScenarioOutcome>& outcomes);
std::vector<ScenarioOutcome> read_benchmark_csv(const std::filesystem::path& path);
void write_summary_csv(const std::filesystem::path& path, const std::vector<EvalMetrics>& rows);
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& sweep);
/// Spearman rho with its bootstrap interval.
void write_sweep_stats_csv(const std::filesystem::path& path, const SweepResult& sweep,
                           int bootstrap_samples);

}  // namespace idas
