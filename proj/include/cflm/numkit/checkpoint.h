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

// Parameter checkpoints.
//
// Layout (all integers little-endian):
//   magic    8 bytes  "CFLMCKPT"
//   version  u32      currently 1
//   count    u32      number of blocks
//   per block:
//     name_len u32, name bytes (UTF-8)
//     rows u64, cols u64
//     rows*cols float64 values, row-major, little-endian

#ifndef CFLM_NUMKIT_CHECKPOINT_H_
#define CFLM_NUMKIT_CHECKPOINT_H_

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "cflm/numkit/tape.h"

namespace cflm::nk {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, std::span<const Parameter* const> params);
void save_checkpoint(const std::filesystem::path& path,
                     std::span<const Parameter* const> params);

// Loads into existing parameters, matching by name and shape. Every
// parameter must be present in the file.
void read_checkpoint(std::istream& in, std::span<Parameter* const> params);
void load_checkpoint(const std::filesystem::path& path,
                     std::span<Parameter* const> params);

}  // namespace cflm::nk

#endif  // CFLM_NUMKIT_CHECKPOINT_H_
