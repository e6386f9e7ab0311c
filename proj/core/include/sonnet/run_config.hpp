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

// Flat run configuration shared by every CLI command. Values come from
// defaults, then an optional JSON file, then command-line overrides.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sonnet/decision.hpp"
#include "sonnet/models.hpp"
#include "sonnet/pipeline.hpp"
#include "sonnet/synthetic.hpp"
#include "sonnet/training.hpp"

namespace sonnet {

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir;  // empty: SONNET_OUT, then "sonnet_out"

  // Inputs.
  std::string annotations;  // annotation CSV (or directory of them)
  std::string features;     // feature CSV (or directory)
  std::string audio;        // audio frame CSV (or directory)
  std::string windows;      // window archive
  std::string model_path;   // checkpoint

  WindowSpec window;
  int gamma = kDefaultGamma;
  int source_fps = 30;

  std::string model = "triplet_sonnet";
  std::string preset = "default";  // "default" or "reduced"
  TrainConfig train;
  std::vector<std::string> masks;  // ablation masks, "a+b" combines groups

  std::string strategy_name = "fixed_interval";
  StrategyConfig strategy;
  std::string coupling_name = "both";
  SyntheticConfig synth;
  std::string report_format = "csv";

  // Copies `seed` into every stochastic component.
  void PropagateSeed();
  WindowLayout Layout() const;
  ModelSpec MakeModelSpec() const;
  StrategyConfig MakeStrategy() const;   // strategy_name applied, window fields synced
  SyntheticConfig MakeSynthetic() const;  // coupling_name applied
  std::string ToJson() const;  // every key, resolved
};

struct ConfigKey {
  std::string name;
  std::string description;
};
const std::vector<ConfigKey>& ConfigKeys();

// Throws Error{ConfigError} on unknown keys or ill-typed values.
void ApplyConfigJson(RunConfig& cfg, std::string_view json);
void ApplyConfigFile(RunConfig& cfg, const std::filesystem::path& path);
// `value` is parsed according to the key's type.
void SetConfigValue(RunConfig& cfg, std::string_view key, std::string_view value);

// flag > config file > SONNET_OUT > "sonnet_out".
std::filesystem::path ResolveOutDir(const RunConfig& cfg);

}  // namespace sonnet
