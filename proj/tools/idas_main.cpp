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

// Command-line driver: train, eval, rollout, sweep and inspect.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "idas/evaluation.hpp"
#include "idas/io.hpp"
#include "idas/training.hpp"

#ifndef IDAS_VERSION
#define IDAS_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace idas;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

/// Bad input: a missing file, an unknown name, an invalid config.
class UsageError : public Error {
 public:
  using Error::Error;
};

fs::path resolve_output(const std::string& out, const std::string& command) {
  fs::path p = out.empty() ? fs::path("runs") / command : fs::path(out);
  const char* root = std::getenv("IDAS_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0' && p.is_relative()) p = fs::path(root) / p;
  return p;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Learner load_learner(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path.string());
  try {
    return Learner::from_checkpoint(load_checkpoint(path));
  } catch (const Error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  for (const auto& name : split(list, ',')) {
    try {
      out.push_back(parse_method(name));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("--methods: no method given");
  return out;
}

std::string fmt_metric(double x) { return std::isnan(x) ? "-" : fmt::format("{:.2f}", x); }

void print_summary(const std::vector<EvalMetrics>& rows) {
  std::cout << fmt::format("{:<12} {:>9} {:>8} {:>8} {:>10} {:>9}\n", "method", "scenarios",
                           "success", "perfect", "avg_speed", "norm_rew");
  for (const auto& r : rows) {
    std::cout << fmt::format("{:<12} {:>9} {:>7}% {:>7}% {:>10} {:>9}\n", method_name(r.method),
                             r.scenarios, fmt_metric(r.success_rate),
                             fmt_metric(r.perfect_success_rate), fmt_metric(r.avg_speed),
                             fmt_metric(r.normalized_reward));
  }
}

/// Writes the manifest when the command leaves, whatever the outcome.
class ManifestScope {
 public:
  ManifestScope(std::string command, std::vector<std::string> args)
      : started_(iso8601_now()) {
    m_.command = std::move(command);
    m_.args = std::move(args);
    m_.version = IDAS_VERSION;
  }
  RunManifest& manifest() { return m_; }
  void set_output(const fs::path& dir) { dir_ = dir; }
  void finish(int code) {
    if (dir_.empty()) return;
    m_.output_dir = dir_.string();
    m_.started_at = started_;
    m_.finished_at = iso8601_now();
    m_.exit_code = code;
    write_manifest(dir_ / "manifest.json", m_);
  }

 private:
  RunManifest m_;
  fs::path dir_;
  std::string started_;
};

// ---- train ----

struct TrainArgs {
  std::string config;
  std::string stage = "all";
  std::string resume;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::uint64_t> stage1_episodes, stage2_episodes, direct_episodes;
  std::optional<std::uint64_t> checkpoint_every;
};

int cmd_train(const TrainArgs& a, ManifestScope& scope) {
  TrainConfig cfg;
  try {
    cfg = load_train_config(a.config);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.workers) cfg.workers = *a.workers;
  if (a.stage1_episodes) cfg.stage1_episodes = *a.stage1_episodes;
  if (a.stage2_episodes) cfg.stage2_episodes = *a.stage2_episodes;
  if (a.direct_episodes) cfg.direct_episodes = *a.direct_episodes;
  if (a.checkpoint_every) cfg.checkpoint_every = *a.checkpoint_every;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  const fs::path out = resolve_output(a.out, "train");
  const fs::path stage1_path = out / "stage1.ckpt";
  std::optional<Learner> learner;
  if (a.stage == "2") {
    const fs::path source = a.resume.empty() ? stage1_path : fs::path(a.resume);
    if (!fs::exists(source)) {
      throw UsageError("stage 2 needs a stage-1 checkpoint: " + source.string() +
                       " does not exist (train stage 1 first or pass --resume)");
    }
    learner = load_learner(source);
  } else if (!a.resume.empty()) {
    learner = load_learner(a.resume);
  }

  fs::create_directories(out);
  scope.set_output(out);
  scope.manifest().config_path = a.config;
  scope.manifest().seed = cfg.seed;
  {
    std::ofstream f(out / "config.json");
    f << train_config_to_json(cfg);
  }

  if (!learner) learner = Learner::create(cfg.seed);
  TrainingLogWriter log(out / "training_log.csv");
  std::string current = "stage1";
  TrainHooks hooks;
  hooks.on_episode = [&](const EpisodeLog& e) {
    log.append(e);
    if (e.episode % 100 == 0) {
      std::cerr << fmt::format("[{}] episode {} return {:.2f} success {:.2f} entropy {:.3f}\n",
                               current, e.episode, e.mean_return, e.success_rate,
                               e.stats.entropy);
    }
  };
  hooks.on_checkpoint = [&](const Learner& l) {
    const std::uint64_t n = current == "stage1" ? l.stage1_episodes : l.stage2_episodes;
    save_checkpoint(out / "checkpoints" / fmt::format("{}_{:07d}.ckpt", current, n),
                    l.to_checkpoint());
  };
  hooks.on_failure = [&](const Learner& l) {
    save_checkpoint(out / "failure.ckpt", l.to_checkpoint());
    std::cerr << "non-finite update; pre-update state saved to "
              << (out / "failure.ckpt").string() << "\n";
  };

  if (a.stage == "1" || a.stage == "all") {
    current = "stage1";
    train_stage1(*learner, cfg, hooks);
    save_checkpoint(stage1_path, learner->to_checkpoint());
    std::cout << "wrote " << stage1_path.string() << "\n";
  }
  if (a.stage == "2" || a.stage == "all") {
    current = "stage2";
    train_stage2(*learner, cfg, hooks);
    save_checkpoint(out / "stage2.ckpt", learner->to_checkpoint());
    std::cout << "wrote " << (out / "stage2.ckpt").string() << "\n";
  }
  if (a.stage == "direct") {
    current = "direct";
    train_direct(*learner, cfg, hooks);
    save_checkpoint(out / "direct.ckpt", learner->to_checkpoint());
    std::cout << "wrote " << (out / "direct.ckpt").string() << "\n";
  }
  return kOk;
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint;
  std::string idas_v;
  std::string idas_direct;
  std::string methods = "idas,idas-v,idas-direct,idm,fsm-idm";
  int scenarios = 100;
  std::string scene_family;
  int scene_count = 4;
  std::uint64_t seed = 0;
  std::string out;
  int workers = 1;
  int max_steps = 600;
  std::string ego_mode = "greedy";
};

int cmd_eval(const EvalArgs& a, ManifestScope& scope) {
  const std::vector<Method> methods = parse_methods(a.methods);
  if (a.scenarios < 1) throw UsageError("--scenarios must be >= 1");
  if (a.workers < 1) throw UsageError("--workers must be >= 1");
  if (a.ego_mode != "greedy" && a.ego_mode != "sample") {
    throw UsageError("--ego-mode must be greedy or sample");
  }
  std::optional<SceneFamily> family;
  if (!a.scene_family.empty()) {
    try {
      family = parse_family(a.scene_family);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  const fs::path ckpt(a.checkpoint);
  const Learner idas = load_learner(ckpt);
  auto sibling = [&](const std::string& given, const char* name) {
    return given.empty() ? ckpt.parent_path() / name : fs::path(given);
  };
  std::optional<Learner> idas_v, direct;
  for (Method m : methods) {
    if (m == Method::kIdasV && !idas_v) idas_v = load_learner(sibling(a.idas_v, "stage1.ckpt"));
    if (m == Method::kIdasDirect && !direct) {
      direct = load_learner(sibling(a.idas_direct, "direct.ckpt"));
    }
  }
  PolicySet policies{&idas.pi, idas_v ? &idas_v->pi : nullptr, direct ? &direct->pi : nullptr};

  const fs::path out = resolve_output(a.out, "eval");
  fs::create_directories(out / "results");
  scope.set_output(out);
  scope.manifest().config_path = a.checkpoint;
  scope.manifest().seed = a.seed;

  std::vector<ScenarioOutcome> outcomes;
  if (family) {
    std::vector<std::vector<TrajectoryRow>> trajectories;
    outcomes = run_scene_family(*family, a.scene_count, a.seed, methods, policies, a.max_steps,
                                &trajectories);
    const RoadNetwork road;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      export_profiles(out / "results" / "profiles", trajectories[i], road,
                      fmt::format("{}_{}_{}_", method_name(outcomes[i].method), outcomes[i].scene,
                                  outcomes[i].scenario));
    }
  } else {
    BenchmarkConfig bc;
    bc.methods = methods;
    bc.scenarios = a.scenarios;
    bc.seed = a.seed;
    bc.max_steps = a.max_steps;
    bc.workers = a.workers;
    bc.ego_mode = a.ego_mode == "sample" ? PolicyMode::kSample : PolicyMode::kGreedy;
    outcomes = run_benchmark(bc, policies);
  }
  const auto summary = summarize(outcomes);
  write_benchmark_csv(out / "results" / "benchmark.csv", outcomes);
  write_summary_csv(out / "results" / "summary.csv", summary);
  print_summary(summary);
  return kOk;
}

// ---- rollout ----

struct RolloutArgs {
  std::string scenario;
  std::string checkpoint;
  std::string baseline;
  std::uint64_t seed = 0;
  std::string mode = "sample";
  std::string out;
  int max_steps = 600;
};

int cmd_rollout(const RolloutArgs& a, ManifestScope& scope) {
  ScenarioSpec spec;
  try {
    spec = load_scenario(a.scenario);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (a.mode != "greedy" && a.mode != "sample") throw UsageError("--mode must be greedy or sample");
  if (!a.baseline.empty()) {
    Controller c;
    try {
      c = parse_controller(a.baseline == "fsm-idm" ? "fsm_idm" : a.baseline);
    } catch (const Error& e) {
      throw UsageError(std::string("--baseline: ") + e.what() +
                       " (valid: robot, idm, fsm-idm, random)");
    }
    if (c == Controller::kPolicy) throw UsageError("--baseline must name a rule-based driver");
    for (auto& e : spec.entries) {
      if (e.controller == Controller::kPolicy) e.controller = c;
    }
  }
  const bool needs_policy =
      std::any_of(spec.entries.begin(), spec.entries.end(),
                  [](const ScenarioEntry& e) { return e.controller == Controller::kPolicy; });
  std::optional<Learner> learner;
  if (needs_policy) {
    if (a.checkpoint.empty()) {
      throw UsageError("scenario has policy-driven vehicles: pass --checkpoint or --baseline");
    }
    learner = load_learner(a.checkpoint);
  }

  const fs::path out = resolve_output(a.out, "rollout");
  fs::create_directories(out);
  scope.set_output(out);
  scope.manifest().config_path = a.scenario;
  scope.manifest().seed = a.seed;

  DriverSet drivers;
  drivers.policy = learner ? &learner->pi : nullptr;
  drivers.mode = a.mode == "greedy" ? PolicyMode::kGreedy : PolicyMode::kSample;
  RolloutOptions options;
  options.max_steps = a.max_steps;
  options.training = false;
  options.record_transitions = false;
  options.record_trajectory = true;
  Rng rng(a.seed);
  const EpisodeResult r = rollout_episode(spec, drivers, rng, options);
  write_trajectory_csv(out / "trajectory.csv", r.trajectory);
  export_profiles(out / "profiles", r.trajectory, spec.road());
  std::cout << fmt::format("steps {} end {} perfect {}\n", r.steps, end_reason_name(r.end_reason),
                           r.perfect() ? "yes" : "no");
  for (const VehicleState& v : r.final_world.vehicles) {
    const auto it = r.total_reward.find(v.id);
    std::cout << fmt::format("vehicle {} lane {} {} reward {}\n", v.id, v.lane,
                             v.collided ? "collided" : v.finished ? "finished" : "unfinished",
                             it == r.total_reward.end() ? 0.0 : it->second);
  }
  return kOk;
}

// ---- sweep ----

struct SweepArgs {
  std::string checkpoint;
  std::uint64_t seed = 0;
  int repetitions = 20;
  std::string grid;
  int bootstrap = 1000;
  std::string out;
  int max_steps = 600;
};

int cmd_sweep(const SweepArgs& a, ManifestScope& scope) {
  const Learner learner = load_learner(a.checkpoint);
  SweepConfig sc;
  sc.seed = a.seed;
  sc.repetitions = a.repetitions;
  sc.bootstrap_samples = a.bootstrap;
  sc.max_steps = a.max_steps;
  for (const auto& item : split(a.grid, ',')) {
    try {
      sc.grid.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("--grid: '" + item + "' is not a number");
    }
  }
  for (double b : sc.grid) {
    if (b < -2.0 || b > 2.0) throw UsageError("--grid: driver types must lie in [-2, 2]");
  }
  if (sc.repetitions < 1) throw UsageError("--repetitions must be >= 1");

  const fs::path out = resolve_output(a.out, "sweep");
  fs::create_directories(out / "results");
  scope.set_output(out);
  scope.manifest().config_path = a.checkpoint;
  scope.manifest().seed = a.seed;

  const ScenarioSpec base = sweep_base_scene(a.seed);
  std::vector<std::vector<TrajectoryRow>> profiles;
  const SweepResult res = driver_type_sweep(learner.pi, base, sc, &profiles);
  write_sweep_csv(out / "results" / "sweep.csv", res);
  write_sweep_stats_csv(out / "results" / "sweep_stats.csv", res, sc.bootstrap_samples);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    export_profiles(out / "results" / "profiles", profiles[i], base.road(),
                    fmt::format("sweep_btype_{}_", res.points[i].b_type));
  }
  for (const auto& p : res.points) {
    std::cout << fmt::format("b_type {:>5} merged {:>3}/{:<3} mean merge time {}\n", p.b_type,
                             p.merge_times.size(), p.merge_times.size() + p.failures,
                             fmt_metric(p.mean_merge_time));
  }
  std::cout << fmt::format("spearman rho {} (95% CI {} .. {})\n", fmt_metric(res.spearman_rho),
                           fmt_metric(res.ci_low), fmt_metric(res.ci_high));
  return kOk;
}

// ---- inspect ----

int cmd_inspect(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
  Checkpoint c;
  try {
    c = load_checkpoint(path);
  } catch (const Error& e) {
    throw UsageError(path + ": " + e.what());
  }
  std::cout << fmt::format("version {}\nstage {}\nstage1_episodes {}\nstage2_episodes {}\n"
                           "updates {}\nblocks {}\n",
                           c.version, c.stage, c.stage1_episodes, c.stage2_episodes, c.updates,
                           c.blocks.size());
  for (const auto& b : c.blocks) {
    double sq = 0.0;
    for (double x : b.value.data) sq += x * x;
    std::string shape;
    for (std::size_t d : b.value.shape) shape += (shape.empty() ? "" : "x") + std::to_string(d);
    std::cout << fmt::format("  {:<28} {:>12} norm {:.6g}\n", b.name, shape, std::sqrt(sq));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavior-aware merging: training, evaluation and inspection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", IDAS_VERSION);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the policy (stage 1, stage 2, both, or direct)");
  train->add_option("config", ta.config, "JSON training config")->required();
  train->add_option("--stage", ta.stage, "1, 2, all or direct")
      ->check(CLI::IsMember({"1", "2", "all", "direct"}));
  train->add_option("--resume", ta.resume, "Checkpoint to continue from");
  train->add_option("--out", ta.out, "Run directory");
  train->add_option("--seed", ta.seed, "Override the config seed");
  train->add_option("--workers", ta.workers, "Parallel rollouts per update round (default 1)");
  train->add_option("--stage1-episodes", ta.stage1_episodes);
  train->add_option("--stage2-episodes", ta.stage2_episodes);
  train->add_option("--direct-episodes", ta.direct_episodes);
  train->add_option("--checkpoint-every", ta.checkpoint_every, "Episodes between checkpoints");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Benchmark methods on random scenarios or scene families");
  eval->add_option("--checkpoint", ea.checkpoint, "IDAS checkpoint (drives non-ego vehicles)")
      ->required();
  eval->add_option("--idas-v", ea.idas_v, "Stage-1-only checkpoint (default: sibling stage1.ckpt)");
  eval->add_option("--idas-direct", ea.idas_direct,
                   "No-curriculum checkpoint (default: sibling direct.ckpt)");
  eval->add_option("--methods", ea.methods, "Comma-separated: idas, idas-v, idas-direct, idm, "
                                            "fsm-idm, random");
  auto* scen = eval->add_option("--scenarios", ea.scenarios, "Random scenarios (default 100)");
  eval->add_option("--scene-family", ea.scene_family, "s1, s2, s3 or s4")->excludes(scen);
  eval->add_option("--scene-count", ea.scene_count, "Scenes per family (default 4)");
  eval->add_option("--seed", ea.seed);
  eval->add_option("--out", ea.out, "Run directory");
  eval->add_option("--workers", ea.workers, "Parallel scenarios (default 1)");
  eval->add_option("--max-steps", ea.max_steps);
  eval->add_option("--ego-mode", ea.ego_mode, "Learned ego: greedy (default) or sample");

  RolloutArgs ra;
  auto* rollout = app.add_subcommand("rollout", "Run one scenario and write its trajectory");
  rollout->add_option("scenario", ra.scenario, "Scenario JSON")->required();
  auto* rc = rollout->add_option("--checkpoint", ra.checkpoint, "Policy for policy vehicles");
  rollout->add_option("--baseline", ra.baseline, "robot, idm, fsm-idm or random for policy vehicles")
      ->excludes(rc);
  rollout->add_option("--seed", ra.seed);
  rollout->add_option("--mode", ra.mode, "sample (default) or greedy");
  rollout->add_option("--out", ra.out, "Run directory");
  rollout->add_option("--max-steps", ra.max_steps);

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep", "Vary the merging vehicle's driver type");
  sweep->add_option("--checkpoint", sa.checkpoint)->required();
  sweep->add_option("--seed", sa.seed);
  sweep->add_option("--repetitions", sa.repetitions, "Repetitions per grid point (default 20)");
  sweep->add_option("--grid", sa.grid, "Comma-separated driver types (default 9 points on [-2, 2])");
  sweep->add_option("--bootstrap", sa.bootstrap, "Bootstrap samples for the CI (default 1000)");
  sweep->add_option("--out", sa.out, "Run directory");
  sweep->add_option("--max-steps", sa.max_steps);

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Print checkpoint metadata and block shapes");
  inspect->add_option("checkpoint", inspect_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  CLI::App* sub = app.get_subcommands().front();
  ManifestScope scope(sub->get_name(), args);
  int code = kOk;
  try {
    if (sub == train) code = cmd_train(ta, scope);
    else if (sub == eval) code = cmd_eval(ea, scope);
    else if (sub == rollout) code = cmd_rollout(ra, scope);
    else if (sub == sweep) code = cmd_sweep(sa, scope);
    else code = cmd_inspect(inspect_path);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = kFailure;
  }
  try {
    scope.finish(code);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write manifest: " << e.what() << "\n";
    if (code == kOk) code = kFailure;
  }
  return code;
}
