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

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sonnet/run_config.hpp"

namespace sonnet::cli {

struct Invocation {
  std::string command;
  RunConfig config;
  std::filesystem::path out;
  std::vector<std::string> inputs;  // positional arguments
};

inline const std::vector<std::string>& CommandNames() {
  static const std::vector<std::string> names = {"ingest", "synth",    "features", "windows",
                                                 "train",  "loso",     "ablate",   "metrics",
                                                 "simulate", "stats",  "report"};
  return names;
}

// Runs one command; throws sonnet::Error.
void Dispatch(const Invocation& inv);

}  // namespace sonnet::cli
