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

#include "idas/evaluation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

namespace idas {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kMaxFinishReward = 20.0;

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return kNaN;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::string format_map(const std::map<int, double>& m) {
  std::string out;
  for (const auto& [k, v] : m) {
    if (!out.empty()) out += ';';
    out += fmt::format("{}:{}", k, v);
  }
  return out;
}

std::map<int, double> parse_map(const std::string& text) {
  std::map<int, double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw Error("malformed map entry '" + item + "'");
    out[std::stoi(item.substr(0, colon))] = std::stod(item.substr(colon + 1));
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Controller controller_for(Method m) {
  switch (m) {
    case Method::kIdas:
    case Method::kIdasV:
    case Method::kIdasDirect: return Controller::kPolicy;
    case Method::kIdm: return Controller::kIdm;
    case Method::kFsmIdm: return Controller::kFsmIdm;
    case Method::kRandom: return Controller::kRandom;
  }
  return Controller::kPolicy;
}

ScenarioOutcome outcome_of(const EpisodeResult& r, const ScenarioSpec& spec, int ego,
                           Method method) {
  ScenarioOutcome o;
  o.method = method;
  o.scene = "random";
  o.seed = spec.seed;
  o.ego = ego;
  o.agents = static_cast<int>(spec.entries.size());
  o.success = r.succeeded(ego);
  o.perfect = r.perfect();
  o.steps = r.steps;
  const WorldState& w = r.final_world;
  for (const VehicleState& v : w.vehicles) {
    auto it = r.total_reward.find(v.id);
    o.rewards[v.id] = it == r.total_reward.end() ? 0.0 : it->second;
    if (v.finished && !v.collided) {
      const double time = (v.finish_step - v.entry_step) * w.dt;
      o.finish_times[v.id] = time;
      o.avg_speeds[v.id] = (w.road.lane_length_m - v.initial_s) / time;
    }
  }
  return o;
}

template <typename Fn>
void parallel_for(int n, int workers, Fn fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::jthread> threads;
  for (int w = 0; w < std::min(workers, n); ++w) {
    threads.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  }
}

}  // namespace

// ---- methods ----

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kIdas: return "idas";
    case Method::kIdasV: return "idas-v";
    case Method::kIdasDirect: return "idas-direct";
    case Method::kIdm: return "idm";
    case Method::kFsmIdm: return "fsm-idm";
    case Method::kRandom: return "random";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::kIdas, Method::kIdasV, Method::kIdasDirect, Method::kIdm,
                   Method::kFsmIdm, Method::kRandom}) {
    if (method_name(m) == name) return m;
  }
  throw Error("unknown method '" + std::string(name) +
              "'; valid methods: idas, idas-v, idas-direct, idm, fsm-idm, random");
}

bool is_learned(Method m) {
  return m == Method::kIdas || m == Method::kIdasV || m == Method::kIdasDirect;
}

const std::vector<Method>& benchmark_methods() {
  static const std::vector<Method> methods = {Method::kIdas, Method::kIdasV, Method::kIdasDirect,
                                              Method::kIdm, Method::kFsmIdm};
  return methods;
}

const PolicyNet* PolicySet::for_method(Method m) const {
  switch (m) {
    case Method::kIdas: return idas;
    case Method::kIdasV: return idas_v;
    case Method::kIdasDirect: return idas_direct;
    default: return nullptr;
  }
}

// ---- benchmark ----

ScenarioSpec benchmark_scenario(const BenchmarkConfig& config, int index) {
  ScenarioRandomization r;
  r.min_agents = config.min_agents;
  r.max_agents = config.max_agents;
  r.entry_window_s = config.entry_window_s;
  r.preplace_fraction = config.preplace_fraction;
  r.max_initial_s = config.max_initial_s;
  r.equal_priority_prob = config.equal_priority_prob;
  r.controller = Controller::kPolicy;
  return generate_scenario(mix_seed(config.seed, static_cast<std::uint64_t>(index)), r);
}

int benchmark_ego(const ScenarioSpec& spec, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 77));
  return static_cast<int>(uniform_int(rng, 0, static_cast<std::int64_t>(spec.entries.size()) - 1));
}

ScenarioOutcome run_scenario(const ScenarioSpec& spec, int ego, Method method,
                             const PolicySet& policies, std::uint64_t seed, int max_steps,
                             EpisodeResult* episode, PolicyMode ego_mode) {
  if (policies.idas == nullptr) throw Error("benchmark needs the IDAS policy for non-ego vehicles");
  ScenarioSpec s = spec;
  for (auto& e : s.entries) e.controller = Controller::kPolicy;
  s.entries.at(static_cast<std::size_t>(ego)).controller = controller_for(method);
  DriverSet drivers;
  drivers.policy = policies.idas;
  drivers.mode = PolicyMode::kSample;
  if (is_learned(method)) {
    const PolicyNet* net = policies.for_method(method);
    if (net == nullptr) {
      throw Error("no checkpoint loaded for method '" + std::string(method_name(method)) + "'");
    }
    drivers.per_vehicle[ego] = net;
    drivers.mode_per_vehicle[ego] = ego_mode;
  }
  RolloutOptions options;
  options.max_steps = max_steps;
  options.training = false;
  options.record_transitions = false;
  options.record_trajectory = episode != nullptr;
  Rng rng(mix_seed(seed, 5));
  EpisodeResult r = rollout_episode(s, drivers, rng, options);
  ScenarioOutcome o = outcome_of(r, spec, ego, method);
  if (episode != nullptr) *episode = std::move(r);
  return o;
}

std::vector<ScenarioOutcome> run_benchmark(const BenchmarkConfig& config,
                                           const PolicySet& policies) {
  for (Method m : config.methods) {
    if (is_learned(m) && policies.for_method(m) == nullptr) {
      throw Error("no checkpoint loaded for method '" + std::string(method_name(m)) + "'");
    }
  }
  const int n = config.scenarios;
  const auto per = static_cast<int>(config.methods.size());
  std::vector<ScenarioOutcome> out(static_cast<std::size_t>(n * per));
  parallel_for(n * per, config.workers, [&](int job) {
    const int k = job / per;
    const Method m = config.methods[static_cast<std::size_t>(job % per)];
    const ScenarioSpec spec = benchmark_scenario(config, k);
    const int ego = benchmark_ego(spec, spec.seed);
    ScenarioOutcome o = run_scenario(spec, ego, m, policies, spec.seed, config.max_steps, nullptr,
                                     config.ego_mode);
    o.scenario = k;
    // Method-major order in the table.
    out[static_cast<std::size_t>((job % per) * n + k)] = std::move(o);
  });
  return out;
}

double normalized_reward(const ScenarioOutcome& o) {
  double total = 0.0;
  for (const auto& [id, r] : o.rewards) total += r;
  return total / (static_cast<double>(o.agents) * kMaxFinishReward);
}

std::vector<EvalMetrics> summarize(const std::vector<ScenarioOutcome>& outcomes) {
  std::vector<Method> order;
  for (const auto& o : outcomes) {
    if (std::ranges::find(order, o.method) == order.end()) order.push_back(o.method);
  }
  std::vector<EvalMetrics> rows;
  for (Method m : order) {
    EvalMetrics row;
    row.method = m;
    std::vector<double> speeds, rewards, finish;
    int success = 0, perfect = 0;
    for (const auto& o : outcomes) {
      if (o.method != m) continue;
      ++row.scenarios;
      success += o.success ? 1 : 0;
      perfect += o.perfect ? 1 : 0;
      rewards.push_back(normalized_reward(o));
      if (o.success) finish.push_back(o.finish_times.at(o.ego));
      if (o.perfect) {
        std::vector<double> s;
        for (const auto& [id, v] : o.avg_speeds) s.push_back(v);
        speeds.push_back(mean(s));
      }
    }
    row.success_rate = 100.0 * success / row.scenarios;
    row.perfect_success_rate = 100.0 * perfect / row.scenarios;
    row.avg_speed = mean(speeds);
    row.normalized_reward = mean(rewards);
    row.avg_finish_time = mean(finish);
    rows.push_back(row);
  }
  return rows;
}

// ---- scenes ----

std::string_view family_name(SceneFamily f) {
  switch (f) {
    case SceneFamily::kS1: return "s1";
    case SceneFamily::kS2: return "s2";
    case SceneFamily::kS3: return "s3";
    case SceneFamily::kS4: return "s4";
  }
  return "?";
}

SceneFamily parse_family(std::string_view name) {
  for (SceneFamily f : {SceneFamily::kS1, SceneFamily::kS2, SceneFamily::kS3, SceneFamily::kS4}) {
    if (family_name(f) == name) return f;
  }
  throw Error("unknown scene family '" + std::string(name) + "'; valid: s1, s2, s3, s4");
}

double time_to_merge_point(double s, double v, const RoadNetwork& road) {
  if (s >= road.merge_point_s) return 0.0;
  if (!(v > 0.0)) throw Error("time_to_merge_point: speed must be positive");
  return (road.merge_point_s - s) / v;
}

ScenarioSpec build_scene(SceneFamily family, std::uint64_t seed) {
  Rng rng(seed);
  ScenarioSpec spec;
  spec.seed = seed;
  if (family == SceneFamily::kS4) {
    spec.lane_priority = {1, 1};
    spec.speed_limit = {kMainLaneSpeedLimit, kMainLaneSpeedLimit};
  }
  const RoadNetwork road = spec.road();
  constexpr double kMinSceneSpeed = 10.0;
  constexpr double kMinTypeGap = 0.5;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::array<double, 2> b{};
    b[0] = uniform(rng, -2.0, 2.0);
    if (family == SceneFamily::kS3) {
      b[1] = b[0];
    } else {
      do {
        b[1] = uniform(rng, -2.0, 2.0);
      } while (std::abs(b[1] - b[0]) < kMinTypeGap);
    }
    std::array<double, 2> v{};
    for (std::size_t i = 0; i < 2; ++i) v[i] = uniform(rng, kMinSceneSpeed, spec.speed_limit[i]);
    std::array<double, 2> t{};
    t[1] = uniform(rng, 4.0, 7.0);
    const double gap = uniform(rng, 0.3, kSceneTimeBound - 0.3);
    switch (family) {
      case SceneFamily::kS1: t[0] = t[1] + gap; break;
      case SceneFamily::kS2: t[0] = t[1] - gap; break;
      default: t[0] = t[1]; break;
    }
    std::array<double, 2> s{};
    bool ok = true;
    for (std::size_t i = 0; i < 2; ++i) {
      s[i] = road.merge_point_s - v[i] * t[i];
      ok = ok && s[i] >= 0.0;
    }
    if (!ok) continue;
    spec.entries.clear();
    for (std::size_t i = 0; i < 2; ++i) {
      ScenarioEntry e;
      e.lane = static_cast<int>(i);
      e.initial_s = s[i];
      e.initial_v = v[i];
      e.b_type = b[i];
      e.controller = Controller::kPolicy;
      spec.entries.push_back(e);
    }
    spec.validate();
    return spec;
  }
  throw Error("scene family " + std::string(family_name(family)) +
              " could not be satisfied under the speed and road limits");
}

std::vector<ScenarioOutcome> run_scene_family(
    SceneFamily family, int count, std::uint64_t seed, const std::vector<Method>& methods,
    const PolicySet& policies, int max_steps,
    std::vector<std::vector<TrajectoryRow>>* trajectories) {
  std::vector<ScenarioOutcome> out;
  for (Method m : methods) {
    if (policies.idas == nullptr) throw Error("scene runs need the IDAS policy");
    const PolicyNet* net = is_learned(m) ? policies.for_method(m) : nullptr;
    if (is_learned(m) && net == nullptr) {
      throw Error("no checkpoint loaded for method '" + std::string(method_name(m)) + "'");
    }
    for (int k = 0; k < count; ++k) {
      const ScenarioSpec spec = build_scene(family, mix_seed(seed, static_cast<std::uint64_t>(k)));
      ScenarioSpec s = spec;
      DriverSet drivers;
      drivers.policy = policies.idas;
      drivers.mode = PolicyMode::kGreedy;
      if (m == Method::kFsmIdm) {
        s.entries[0].controller = Controller::kFsmIdm;
      } else if (!is_learned(m)) {
        for (auto& e : s.entries) e.controller = controller_for(m);
      } else {
        drivers.policy = net;
      }
      RolloutOptions options;
      options.max_steps = max_steps;
      options.training = false;
      options.record_transitions = false;
      options.record_trajectory = trajectories != nullptr;
      Rng rng(mix_seed(spec.seed, 5));
      EpisodeResult r = rollout_episode(s, drivers, rng, options);
      ScenarioOutcome o = outcome_of(r, spec, 0, m);
      if (trajectories != nullptr) trajectories->push_back(std::move(r.trajectory));
      o.scene = std::string(family_name(family));
      o.scenario = k;
      out.push_back(std::move(o));
    }
  }
  return out;
}

// ---- sweep ----

std::vector<double> SweepConfig::default_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 8; ++i) g.push_back(-2.0 + 0.5 * i);
  return g;
}

ScenarioSpec sweep_base_scene(std::uint64_t seed) {
  ScenarioSpec spec = build_scene(SceneFamily::kS3, seed);
  spec.entries[0].b_type = kSweepMainLaneType;
  return spec;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error("spearman: length mismatch");
  const std::size_t n = x.size();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::ranges::sort(idx, [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x);
  const std::vector<double> ry = ranks(y);
  const double mx = mean(rx);
  const double my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return kNaN;
  return sxy / std::sqrt(sxx * syy);
}

SweepResult driver_type_sweep(const PolicyNet& policy, const ScenarioSpec& base,
                              const SweepConfig& config,
                              std::vector<std::vector<TrajectoryRow>>* profiles) {
  if (base.entries.size() < 2) throw Error("sweep: base scene needs a merging vehicle");
  const std::vector<double> grid = config.grid.empty() ? SweepConfig::default_grid() : config.grid;
  constexpr int kMerging = 1;
  SweepResult result;
  for (double b : grid) {
    SweepPoint point;
    point.b_type = b;
    for (int r = 0; r < config.repetitions; ++r) {
      ScenarioSpec spec = base;
      spec.entries[kMerging].b_type = b;
      DriverSet drivers;
      drivers.policy = &policy;
      drivers.mode = PolicyMode::kSample;
      RolloutOptions options;
      options.max_steps = config.max_steps;
      options.training = false;
      options.record_transitions = false;
      options.record_trajectory = profiles != nullptr && r == 0;
      // The same seed at every grid point: only the driver type differs.
      Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(r)));
      EpisodeResult ep = rollout_episode(spec, drivers, rng, options);
      const VehicleState& m = ep.final_world.vehicle(kMerging);
      if (m.merge_step >= 0 && !m.collided) {
        point.merge_times.push_back((m.merge_step - m.entry_step) * ep.final_world.dt);
        point.repetition_times.push_back(point.merge_times.back());
      } else {
        ++point.failures;
        point.repetition_times.push_back(kNaN);
      }
      if (options.record_trajectory) profiles->push_back(std::move(ep.trajectory));
    }
    point.mean_merge_time = mean(point.merge_times);
    result.points.push_back(std::move(point));
  }

  auto rho_of = [](const std::vector<SweepPoint>& pts, const std::vector<double>& means) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::isnan(means[i])) continue;
      xs.push_back(pts[i].b_type);
      ys.push_back(means[i]);
    }
    return xs.size() < 2 ? kNaN : spearman(xs, ys);
  };
  std::vector<double> means;
  for (const auto& p : result.points) means.push_back(p.mean_merge_time);
  result.spearman_rho = rho_of(result.points, means);

  // Percentile bootstrap over repetitions. Repetition r uses the same seed at
  // every grid point, so indices are resampled jointly to keep the pairing.
  Rng rng(mix_seed(config.seed, 999));
  std::vector<double> rhos;
  const auto reps = static_cast<std::int64_t>(config.repetitions);
  std::vector<std::size_t> draw(static_cast<std::size_t>(reps));
  for (int b = 0; b < config.bootstrap_samples && reps > 0; ++b) {
    for (auto& i : draw) i = static_cast<std::size_t>(uniform_int(rng, 0, reps - 1));
    std::vector<double> resampled;
    for (const auto& p : result.points) {
      double sum = 0.0;
      int n = 0;
      for (std::size_t i : draw) {
        if (std::isnan(p.repetition_times[i])) continue;
        sum += p.repetition_times[i];
        ++n;
      }
      resampled.push_back(n == 0 ? kNaN : sum / n);
    }
    const double rho = rho_of(result.points, resampled);
    if (!std::isnan(rho)) rhos.push_back(rho);
  }
  if (rhos.empty()) {
    result.ci_low = result.ci_high = kNaN;
  } else {
    std::ranges::sort(rhos);
    auto pct = [&rhos](double q) {
      const auto i = static_cast<std::size_t>(q * static_cast<double>(rhos.size() - 1) + 0.5);
      return rhos[std::min(i, rhos.size() - 1)];
    };
    result.ci_low = pct(0.025);
    result.ci_high = pct(0.975);
  }
  return result;
}

// ---- persistence ----

namespace {

constexpr const char* kBenchmarkHeader =
    "method,scene,scenario,seed,ego,agents,success,perfect,steps,ego_finish_time,"
    "normalized_reward,rewards,finish_times,avg_speeds";

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_benchmark_csv(const std::filesystem::path& path,
                         const std::vector<ScenarioOutcome>& outcomes) {
  std::ofstream out = open_out(path);
  out << kBenchmarkHeader << '\n';
  for (const auto& o : outcomes) {
    auto it = o.finish_times.find(o.ego);
    const std::string ego_time = it == o.finish_times.end() ? "" : fmt::format("{}", it->second);
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", method_name(o.method),
                       o.scene, o.scenario, o.seed, o.ego, o.agents, o.success ? 1 : 0,
                       o.perfect ? 1 : 0, o.steps, ego_time, normalized_reward(o),
                       format_map(o.rewards), format_map(o.finish_times),
                       format_map(o.avg_speeds));
  }
}

std::vector<ScenarioOutcome> read_benchmark_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kBenchmarkHeader) {
    throw Error(path.string() + ": unexpected header");
  }
  std::vector<ScenarioOutcome> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 14) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": expected 14 columns");
    }
    ScenarioOutcome o;
    o.method = parse_method(cells[0]);
    o.scene = cells[1];
    o.scenario = std::stoi(cells[2]);
    o.seed = std::stoull(cells[3]);
    o.ego = std::stoi(cells[4]);
    o.agents = std::stoi(cells[5]);
    o.success = cells[6] == "1";
    o.perfect = cells[7] == "1";
    o.steps = std::stoi(cells[8]);
    o.rewards = parse_map(cells[11]);
    o.finish_times = parse_map(cells[12]);
    o.avg_speeds = parse_map(cells[13]);
    out.push_back(std::move(o));
  }
  return out;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<EvalMetrics>& rows) {
  std::ofstream out = open_out(path);
  out << "method,scenarios,success_rate,perfect_success_rate,avg_speed,normalized_reward,"
         "avg_finish_time\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{}\n", method_name(r.method), r.scenarios,
                       r.success_rate, r.perfect_success_rate, r.avg_speed, r.normalized_reward,
                       r.avg_finish_time);
  }
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& sweep) {
  std::ofstream out = open_out(path);
  out << "b_type,repetitions,merged,failures,mean_merge_time\n";
  for (const auto& p : sweep.points) {
    out << fmt::format("{},{},{},{},{}\n", p.b_type, p.merge_times.size() + p.failures,
                       p.merge_times.size(), p.failures, p.mean_merge_time);
  }
}

void write_sweep_stats_csv(const std::filesystem::path& path, const SweepResult& sweep,
                           int bootstrap_samples) {
  std::ofstream out = open_out(path);
  out << "spearman_rho,ci_low,ci_high,bootstrap_samples\n";
  out << fmt::format("{},{},{},{}\n", sweep.spearman_rho, sweep.ci_low, sweep.ci_high,
                     bootstrap_samples);
}

}  // namespace idas
