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

// Versioned binary checkpoints: a fixed header followed by named parameter
// blocks, all little-endian.
//
//   "IDASCKPT" | u32 version | u32 stage | u64 stage1 episodes |
//   u64 stage2 episodes | u64 updates | u32 block count |
//   blocks: u32 name length, name bytes, u32 rank, u64 dims[rank], f64 data

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "idas/nn.hpp"

namespace idas {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint32_t stage = 1;
  std::uint64_t stage1_episodes = 0;
  std::uint64_t stage2_episodes = 0;
  std::uint64_t updates = 0;
  std::vector<nn::ParamBlock> blocks;

  bool has_block(const std::string& name) const;
  const nn::Tensor& block(const std::string& name) const;
  /// Appends every block of `set` with `prefix` prepended to its name.
  void append(const nn::ParamSet& set, const std::string& prefix = "");
  /// Copies blocks named prefix + name into `set`; shapes must match.
  void extract(nn::ParamSet& set, const std::string& prefix = "") const;

  bool operator==(const Checkpoint&) const = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws Error for bad magic, unsupported versions, or truncated data; the
/// message names the block being read.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace idas
