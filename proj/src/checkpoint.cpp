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

#include "idas/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace idas {

namespace {

constexpr char kMagic[8] = {'I', 'D', 'A', 'S', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const std::string& what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void get_doubles(std::vector<double>& out, const std::string& what) {
    need(out.size() * sizeof(double), what);
    std::memcpy(out.data(), bytes_.data() + pos_, out.size() * sizeof(double));
    pos_ += out.size() * sizeof(double);
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const std::string& what) const {
    if (bytes_.size() - pos_ < n) {
      throw Error("checkpoint truncated while reading " + what);
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

bool Checkpoint::has_block(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return true;
  }
  return false;
}

const nn::Tensor& Checkpoint::block(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return b.value;
  }
  throw Error("checkpoint has no block named '" + name + "'");
}

void Checkpoint::append(const nn::ParamSet& set, const std::string& prefix) {
  for (const auto& b : set.blocks()) blocks.push_back({prefix + b.name, b.value});
}

void Checkpoint::extract(nn::ParamSet& set, const std::string& prefix) const {
  for (auto& b : set.blocks()) {
    const nn::Tensor& src = block(prefix + b.name);
    if (src.shape != b.value.shape) {
      throw Error("checkpoint block '" + prefix + b.name + "' has the wrong shape");
    }
    b.value = src;
  }
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put(out, ckpt.version);
  put(out, ckpt.stage);
  put(out, ckpt.stage1_episodes);
  put(out, ckpt.stage2_episodes);
  put(out, ckpt.updates);
  put(out, static_cast<std::uint32_t>(ckpt.blocks.size()));
  for (const auto& b : ckpt.blocks) {
    put(out, static_cast<std::uint32_t>(b.name.size()));
    out += b.name;
    put(out, static_cast<std::uint32_t>(b.value.shape.size()));
    for (std::size_t d : b.value.shape) put(out, static_cast<std::uint64_t>(d));
    out.append(reinterpret_cast<const char*>(b.value.data.data()),
               b.value.data.size() * sizeof(double));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.get_string(sizeof(kMagic), "header") != std::string(kMagic, sizeof(kMagic))) {
    throw Error("not a checkpoint: bad magic");
  }
  Checkpoint ckpt;
  ckpt.version = in.get<std::uint32_t>("header");
  if (ckpt.version != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(ckpt.version));
  }
  ckpt.stage = in.get<std::uint32_t>("header");
  ckpt.stage1_episodes = in.get<std::uint64_t>("header");
  ckpt.stage2_episodes = in.get<std::uint64_t>("header");
  ckpt.updates = in.get<std::uint64_t>("header");
  const auto count = in.get<std::uint32_t>("header");
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string index = "block #" + std::to_string(k);
    const auto name_len = in.get<std::uint32_t>(index + " name");
    const std::string name = in.get_string(name_len, index + " name");
    const std::string what = "block '" + name + "'";
    const auto rank = in.get<std::uint32_t>(what + " shape");
    if (rank > 8) throw Error("checkpoint " + what + " has implausible rank");
    std::vector<std::size_t> shape;
    std::uint64_t numel = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto d = in.get<std::uint64_t>(what + " shape");
      numel *= d;
      shape.push_back(static_cast<std::size_t>(d));
    }
    if (numel > bytes.size() / sizeof(double)) {
      throw Error("checkpoint truncated while reading " + what + " data");
    }
    nn::ParamBlock block{name, nn::Tensor(shape)};
    in.get_doubles(block.value.data, what + " data");
    ckpt.blocks.push_back(std::move(block));
  }
  if (!in.at_end()) throw Error("checkpoint has trailing bytes after the last block");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = serialize_checkpoint(ckpt);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace idas
