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


// The cflm command-line interface. One binary, one subcommand per pipeline
// stage; every run writes its artifacts and a manifest under --out.

#ifndef CFLM_TOOLS_CLI_H_
#define CFLM_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace cflm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace cflm::cli

#endif  // CFLM_TOOLS_CLI_H_
