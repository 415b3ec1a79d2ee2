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

#include "idas/io.hpp"

#include <fmt/format.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

namespace idas {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

struct TextPos {
  std::size_t line = 1;
  std::size_t column = 1;
};

TextPos position_of(const std::string& text, std::size_t byte) {
  TextPos p;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++p.line;
      p.column = 1;
    } else {
      ++p.column;
    }
  }
  return p;
}

// Position of the first occurrence of a quoted key.
TextPos key_position(const std::string& text, const std::string& key) {
  const std::size_t at = text.find("\"" + key + "\"");
  return position_of(text, at == std::string::npos ? 0 : at);
}

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    const TextPos p = position_of(text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(fmt::format("{}:{}:{}: malformed JSON ({})", source, p.line, p.column,
                            e.what()));
  }
}

double number_field(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw Error(path + key + ": missing");
  if (!it->is_number()) throw Error(path + key + ": expected a number");
  return it->get<double>();
}

}  // namespace

// ---- scenarios ----

ScenarioSpec parse_scenario_json(const std::string& text) {
  const json doc = parse_json(text, "scenario");
  if (!doc.is_object()) throw Error("scenario: expected a JSON object");
  static const std::vector<std::string> kTop = {"seed", "speed_limit", "lane_priority", "entries"};
  static const std::vector<std::string> kEntry = {"lane",      "entry_time_s", "initial_s",
                                                  "initial_v", "b_type",       "controller"};
  for (const auto& [k, v] : doc.items()) {
    if (std::find(kTop.begin(), kTop.end(), k) == kTop.end()) {
      throw Error("scenario: unknown field '" + k + "'");
    }
  }
  ScenarioSpec spec;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw Error("seed: expected a non-negative integer");
    spec.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("speed_limit")) {
    const json& a = doc["speed_limit"];
    if (!a.is_array() || a.size() != 2) throw Error("speed_limit: expected two numbers");
    for (std::size_t i = 0; i < 2; ++i) {
      if (!a[i].is_number()) throw Error(fmt::format("speed_limit[{}]: expected a number", i));
      spec.speed_limit[i] = a[i].get<double>();
    }
  }
  if (doc.contains("lane_priority")) {
    const json& a = doc["lane_priority"];
    if (!a.is_array() || a.size() != 2) throw Error("lane_priority: expected two integers");
    for (std::size_t i = 0; i < 2; ++i) {
      if (!a[i].is_number_integer()) {
        throw Error(fmt::format("lane_priority[{}]: expected an integer", i));
      }
      spec.lane_priority[i] = a[i].get<int>();
    }
  }
  if (!doc.contains("entries") || !doc["entries"].is_array()) {
    throw Error("entries: expected an array of vehicles");
  }
  const json& entries = doc["entries"];
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string path = fmt::format("entries[{}].", i);
    const json& e = entries[i];
    if (!e.is_object()) throw Error(fmt::format("entries[{}]: expected an object", i));
    for (const auto& [k, v] : e.items()) {
      if (std::find(kEntry.begin(), kEntry.end(), k) == kEntry.end()) {
        throw Error(path + k + ": unknown field");
      }
    }
    ScenarioEntry entry;
    const auto lane = e.find("lane");
    if (lane == e.end() || !lane->is_number_integer()) throw Error(path + "lane: expected 0 or 1");
    entry.lane = lane->get<int>();
    if (entry.lane != 0 && entry.lane != 1) throw Error(path + "lane: expected 0 or 1");
    entry.entry_time_s = e.contains("entry_time_s") ? number_field(e, "entry_time_s", path) : 0.0;
    entry.initial_s = e.contains("initial_s") ? number_field(e, "initial_s", path) : 0.0;
    entry.initial_v = number_field(e, "initial_v", path);
    entry.b_type = e.contains("b_type") ? number_field(e, "b_type", path) : 0.0;
    if (e.contains("controller")) {
      if (!e["controller"].is_string()) throw Error(path + "controller: expected a string");
      try {
        entry.controller = parse_controller(e["controller"].get<std::string>());
      } catch (const Error& err) {
        throw Error(path + "controller: " + err.what());
      }
    }
    spec.entries.push_back(entry);
  }
  spec.validate();
  return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  try {
    return parse_scenario_json(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string scenario_to_json(const ScenarioSpec& spec) {
  json doc;
  doc["seed"] = spec.seed;
  doc["speed_limit"] = spec.speed_limit;
  doc["lane_priority"] = spec.lane_priority;
  doc["entries"] = json::array();
  for (const auto& e : spec.entries) {
    doc["entries"].push_back({{"lane", e.lane},
                              {"entry_time_s", e.entry_time_s},
                              {"initial_s", e.initial_s},
                              {"initial_v", e.initial_v},
                              {"b_type", e.b_type},
                              {"controller", std::string(controller_name(e.controller))}});
  }
  return doc.dump(2) + "\n";
}

// ---- training config ----

namespace {

struct ConfigField {
  const char* name;
  enum Kind { kReal, kInt, kCount } kind;
  std::function<void(TrainConfig&, const json&)> set;
  std::function<json(const TrainConfig&)> get;
};

template <typename T>
ConfigField field(const char* name, ConfigField::Kind kind, T TrainConfig::*member) {
  return {name, kind, [member](TrainConfig& c, const json& v) { c.*member = v.get<T>(); },
          [member](const TrainConfig& c) { return json(c.*member); }};
}

const std::vector<ConfigField>& config_fields() {
  using K = ConfigField::Kind;
  static const std::vector<ConfigField> fields = {
      field("gamma", K::kReal, &TrainConfig::gamma),
      field("alpha", K::kReal, &TrainConfig::alpha),
      field("stage1_episodes", K::kCount, &TrainConfig::stage1_episodes),
      field("stage2_episodes", K::kCount, &TrainConfig::stage2_episodes),
      field("direct_episodes", K::kCount, &TrainConfig::direct_episodes),
      field("stage2_agent_count", K::kInt, &TrainConfig::stage2_agent_count),
      field("stage1_min_robots", K::kInt, &TrainConfig::stage1_min_robots),
      field("stage1_max_robots", K::kInt, &TrainConfig::stage1_max_robots),
      field("lr_policy", K::kReal, &TrainConfig::lr_policy),
      field("lr_critic", K::kReal, &TrainConfig::lr_critic),
      field("tau", K::kReal, &TrainConfig::tau),
      field("entropy_coef", K::kReal, &TrainConfig::entropy_coef),
      field("seed", K::kCount, &TrainConfig::seed),
      field("max_steps", K::kInt, &TrainConfig::max_steps),
      field("checkpoint_every", K::kCount, &TrainConfig::checkpoint_every),
      field("workers", K::kInt, &TrainConfig::workers),
      field("entry_window_s", K::kReal, &TrainConfig::entry_window_s),
      field("min_initial_v", K::kReal, &TrainConfig::min_initial_v),
      field("max_initial_v", K::kReal, &TrainConfig::max_initial_v),
      field("preplace_fraction", K::kReal, &TrainConfig::preplace_fraction),
      field("max_initial_s", K::kReal, &TrainConfig::max_initial_s),
      field("equal_priority_prob", K::kReal, &TrainConfig::equal_priority_prob),
      field("learner_max_initial_s", K::kReal, &TrainConfig::learner_max_initial_s),
  };
  return fields;
}

}  // namespace

TrainConfig parse_train_config(const std::string& text, const std::string& source) {
  const json doc = parse_json(text, source);
  if (!doc.is_object()) throw Error(source + ":1:1: expected a JSON object");
  TrainConfig config;
  for (const auto& [key, value] : doc.items()) {
    const TextPos p = key_position(text, key);
    const auto where = fmt::format("{}:{}:{}: ", source, p.line, p.column);
    const auto& fields = config_fields();
    const auto it = std::find_if(fields.begin(), fields.end(),
                                 [&key](const ConfigField& f) { return key == f.name; });
    if (it == fields.end()) throw Error(where + "unknown key '" + key + "'");
    const bool ok = it->kind == ConfigField::kReal    ? value.is_number()
                    : it->kind == ConfigField::kCount ? value.is_number_unsigned()
                                                      : value.is_number_integer();
    if (!ok) {
      const char* want = it->kind == ConfigField::kReal    ? "a number"
                         : it->kind == ConfigField::kCount ? "a non-negative integer"
                                                           : "an integer";
      throw Error(where + "'" + key + "' must be " + want);
    }
    it->set(config, value);
  }
  try {
    config.validate();
  } catch (const Error& e) {
    throw Error(source + ": " + e.what());
  }
  return config;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return parse_train_config(read_file(path), path.string());
}

std::string train_config_to_json(const TrainConfig& config) {
  json doc = json::object();
  for (const auto& f : config_fields()) doc[f.name] = f.get(config);
  return doc.dump(2) + "\n";
}

// ---- CSV outputs ----

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
  out << kTrajectoryHeader << '\n';
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", r.t, r.id, r.lane, r.s, r.v, r.a,
                       action_name(r.action), r.mask.to_string(), r.b_prio, r.b_type, r.events,
                       r.reward);
  }
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<TrajectoryRow>& rows) {
  std::ofstream out = open_out(path);
  write_trajectory_csv(out, rows);
}

void export_profiles(const std::filesystem::path& dir, const std::vector<TrajectoryRow>& rows,
                     const RoadNetwork& road, const std::string& prefix) {
  std::ofstream pos = open_out(dir / (prefix + "positions.csv"));
  std::ofstream vel = open_out(dir / (prefix + "velocities.csv"));
  pos << "t,vehicle,lane,d,zone_start,zone_end\n";
  vel << "t,vehicle,v\n";
  const double zone = road.merging_zone_radius_m;
  for (const auto& r : rows) {
    const double t = r.t * kStepSeconds;
    const double d = r.s - road.merge_point_s;
    pos << fmt::format("{},{},{},{},{},{}\n", t, r.id, r.lane, d, -zone, zone);
    vel << fmt::format("{},{},{}\n", t, r.id, r.v);
  }
}

TrainingLogWriter::TrainingLogWriter(const std::filesystem::path& path) : path_(path) {
  std::ofstream out = open_out(path_);
  out << "episode,stage,steps,end_reason,mean_return,success_rate,returns,success,loss_v,loss_q,"
         "entropy\n";
}

void TrainingLogWriter::append(const EpisodeLog& log) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error("cannot append to " + path_.string());
  std::string returns, success;
  for (const auto& [id, r] : log.returns) {
    if (!returns.empty()) returns += ';';
    returns += fmt::format("{}:{}", id, r);
  }
  for (const auto& [id, ok] : log.success) {
    if (!success.empty()) success += ';';
    success += fmt::format("{}:{}", id, ok ? 1 : 0);
  }
  out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", log.episode, log.stage, log.steps,
                     end_reason_name(log.end_reason), log.mean_return, log.success_rate, returns,
                     success, log.stats.loss_v, log.stats.loss_q, log.stats.entropy);
}

// ---- run manifest ----

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  json doc;
  doc["command"] = m.command;
  doc["args"] = m.args;
  doc["config_path"] = m.config_path;
  doc["seed"] = m.seed;
  doc["output_dir"] = m.output_dir;
  doc["version"] = m.version;
  doc["started_at"] = m.started_at;
  doc["finished_at"] = m.finished_at;
  doc["exit_code"] = m.exit_code;
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

}  // namespace idas
