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


// Run manifests: {"cmd", "seed", "inputs": {path: sha256}, "outputs": {path:
// sha256}}. Directory inputs and outputs are expanded to their files.

#ifndef CFLM_TOOLS_MANIFEST_H_
#define CFLM_TOOLS_MANIFEST_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace cflm::cli {

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

class Manifest {
 public:
  Manifest(std::string cmd, std::uint64_t seed)
      : cmd_(std::move(cmd)), seed_(seed) {}

  // Inputs are hashed when the manifest is serialized.
  void add_input(const std::filesystem::path& path);
  // `path` is relative to the output directory.
  void add_output(const std::filesystem::path& out_dir,
                  const std::filesystem::path& path);

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& out_dir) const;

 private:
  std::string cmd_;
  std::uint64_t seed_;
  std::vector<std::filesystem::path> inputs_;
  std::map<std::string, std::string> outputs_;
};

}  // namespace cflm::cli

#endif  // CFLM_TOOLS_MANIFEST_H_
