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

// File formats around the core: scenario and training-config JSON,
// trajectory and profile CSVs, the per-episode training log, and the run
// manifest.

#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "idas/rollout.hpp"
#include "idas/sim.hpp"
#include "idas/training.hpp"

namespace idas {

// ---- scenarios ----

/// Parses a scenario document. Errors name the offending field, e.g.
/// "entries[1].initial_v: expected a number". The result is validated.
ScenarioSpec parse_scenario_json(const std::string& text);
ScenarioSpec load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const ScenarioSpec& spec);

// ---- training config ----

/// Parses a flat JSON object whose keys mirror TrainConfig. Unknown keys and
/// type errors are reported with the line and column of the key.
TrainConfig parse_train_config(const std::string& text, const std::string& source = "config");
TrainConfig load_train_config(const std::filesystem::path& path);
std::string train_config_to_json(const TrainConfig& config);

// ---- CSV outputs ----

inline constexpr const char* kTrajectoryHeader = "t,id,lane,s,v,a,action,mask,b_prio,b_type,events,reward";

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);
void write_trajectory_csv(const std::filesystem::path& path, const std::vector<TrajectoryRow>& rows);

/// Writes positions.csv (t, vehicle, lane, path coordinate d, merging-zone
/// bounds) and velocities.csv (t, vehicle, v) into `dir`, with `prefix`
/// prepended to both file names.
void export_profiles(const std::filesystem::path& dir, const std::vector<TrajectoryRow>& rows,
                     const RoadNetwork& road, const std::string& prefix = "");

/// Per-episode training log.
class TrainingLogWriter {
 public:
  explicit TrainingLogWriter(const std::filesystem::path& path);
  void append(const EpisodeLog& log);

 private:
  std::filesystem::path path_;
};

// ---- run manifest ----

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string version;
  std::string started_at;
  std::string finished_at;
  int exit_code = 0;
  std::vector<std::string> args;
};

std::string iso8601_now();
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

}  // namespace idas
