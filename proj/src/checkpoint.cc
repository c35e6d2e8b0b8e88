// Copyright 2026 The cflm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cflm/numkit/checkpoint.h"

#include <bit>
#include <fstream>
#include <map>

namespace cflm::nk {
namespace {

constexpr char kMagic[8] = {'C', 'F', 'L', 'M', 'C', 'K', 'P', 'T'};

template <typename U>
void put_le(std::ostream& out, U value) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  }
  out.write(bytes, sizeof(U));
}

template <typename U>
U get_le(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(U));
  if (!in) throw Error("checkpoint: truncated file");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(bytes[i]) << (8 * i);
  }
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out,
                      std::span<const Parameter* const> params) {
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.cols()));
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(p->value.data()[i]));
    }
  }
  if (!out) throw Error("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path,
                     std::span<const Parameter* const> params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("checkpoint: cannot open " + path.string());
  write_checkpoint(out, params);
}

void read_checkpoint(std::istream& in, std::span<Parameter* const> params) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + sizeof(magic), kMagic)) {
    throw Error("checkpoint: bad magic");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(in);
  std::map<std::string, Matrix> blocks;
  for (std::uint32_t b = 0; b < count; ++b) {
    const auto name_len = get_le<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rows = get_le<std::uint64_t>(in);
    const auto cols = get_le<std::uint64_t>(in);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = std::bit_cast<double>(get_le<std::uint64_t>(in));
    }
    blocks.emplace(std::move(name), std::move(m));
  }
  for (Parameter* p : params) {
    auto it = blocks.find(p->name);
    if (it == blocks.end()) throw Error("checkpoint: missing block " + p->name);
    if (it->second.rows() != p->value.rows() ||
        it->second.cols() != p->value.cols()) {
      throw Error("checkpoint: block " + p->name + " has shape " +
                  shape_of(it->second) + ", expected " + shape_of(p->value));
    }
    p->value = it->second;
  }
}

void load_checkpoint(const std::filesystem::path& path,
                     std::span<Parameter* const> params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open " + path.string());
  read_checkpoint(in, params);
}

}  // namespace cflm::nk
