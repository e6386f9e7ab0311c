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

#include "sonnet/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "sonnet/errors.hpp"

namespace sonnet {

using nlohmann::json;

namespace {

struct Field {
  std::string name;
  std::string description;
  bool is_string;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

#define SONNET_FIELD(key, member, desc)                                                  \
  Field {                                                                                \
    key, desc, std::is_same_v<std::decay_t<decltype(RunConfig{}.member)>, std::string>,   \
        [](const RunConfig& c) { return json(c.member); },                               \
        [](RunConfig& c, const json& v) { v.get_to(c.member); }                           \
  }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      SONNET_FIELD("seed", seed, "seed for every stochastic component"),
      SONNET_FIELD("out", out_dir, "output directory"),
      SONNET_FIELD("annotations", annotations, "annotation CSV file or directory"),
      SONNET_FIELD("features", features, "feature CSV file or directory"),
      SONNET_FIELD("audio", audio, "audio frame CSV file or directory"),
      SONNET_FIELD("windows", windows, "window archive path"),
      SONNET_FIELD("model_path", model_path, "model checkpoint path"),
      SONNET_FIELD("k_seconds", window.k_seconds, "window length in seconds"),
      SONNET_FIELD("fps", window.fps, "model frame rate"),
      SONNET_FIELD("source_fps", source_fps, "frame rate of recorded feature streams"),
      SONNET_FIELD("horizon_s", window.horizon_s, "prediction horizon (metadata)"),
      SONNET_FIELD("min_gap_to_positive_ms", window.min_gap_to_positive_ms,
                   "drop negatives closer than this to a lift"),
      SONNET_FIELD("gamma", gamma, "bite feature tiling factor"),
      SONNET_FIELD("model", model, "model variant"),
      SONNET_FIELD("preset", preset, "architecture preset: default or reduced"),
      SONNET_FIELD("learning_rate", train.learning_rate, "Adam learning rate"),
      SONNET_FIELD("batch_size", train.batch_size, "minibatch size"),
      SONNET_FIELD("patience", train.patience, "early-stopping patience (epochs)"),
      SONNET_FIELD("max_epochs", train.max_epochs, "maximum training epochs"),
      SONNET_FIELD("validation_fraction", train.validation_fraction,
                   "tail fraction of each training session used for validation"),
      SONNET_FIELD("jobs", train.jobs, "parallel folds / sessions"),
      SONNET_FIELD("masks", masks, "ablation masks"),
      SONNET_FIELD("strategy", strategy_name, "bite timing strategy"),
      SONNET_FIELD("target_seat", strategy.target_seat, "seat being fed"),
      SONNET_FIELD("sample_period_s", strategy.sample_period_s, "learned strategy sampling period"),
      SONNET_FIELD("fixed_wait_s", strategy.fixed_wait_s, "fixed-interval wait"),
      SONNET_FIELD("transfer_s", strategy.transfer_s, "bite transfer duration"),
      SONNET_FIELD("time_rescale_factor", strategy.time_rescale_factor,
                   "divisor applied to time since last bite during replay"),
      SONNET_FIELD("threshold", strategy.threshold, "learned strategy feed threshold"),
      SONNET_FIELD("sessions", synth.n_sessions, "synthetic sessions to generate"),
      SONNET_FIELD("duration_s", synth.duration_s, "synthetic session length"),
      SONNET_FIELD("mean_bite_gap_s", synth.mean_bite_gap_s, "synthetic mean gap between lifts"),
      SONNET_FIELD("refractory_s", synth.refractory_s, "synthetic minimum satiation interval"),
      SONNET_FIELD("gap_shape", synth.gap_shape, "gamma shape of user-driven lift gaps"),
      SONNET_FIELD("coupling", coupling_name, "synthetic label coupling"),
      SONNET_FIELD("missing_rate", synth.missing_rate, "synthetic per-frame dropout"),
      SONNET_FIELD("disruption_prob", synth.disruption_prob, "synthetic disruption probability"),
      SONNET_FIELD("report_format", report_format, "stats report format: csv or json"),
  };
  return fields;
}

#undef SONNET_FIELD

const Field* Find(std::string_view key) {
  for (const auto& f : Fields())
    if (f.name == key) return &f;
  return nullptr;
}

}  // namespace

void RunConfig::PropagateSeed() {
  train.seed = seed;
  synth.seed = seed;
}

WindowLayout RunConfig::Layout() const {
  WindowLayout l;
  l.gamma = gamma;
  return l;
}

ModelSpec RunConfig::MakeModelSpec() const {
  const auto variant = ParseModelVariant(model);
  ModelSpec s;
  if (preset == "default")
    s = ModelSpec::Default(variant);
  else if (preset == "reduced")
    s = ModelSpec::Reduced(variant);
  else
    throw Error(ErrorCode::kConfigError, "unknown preset '" + preset + "'");
  s.layout = Layout();
  s.k_seconds = window.k_seconds;
  s.fps = window.fps;
  s.seed = seed;
  return s;
}

StrategyConfig RunConfig::MakeStrategy() const {
  StrategyConfig s = strategy;
  s.strategy = ParseStrategy(strategy_name);
  s.window_k_s = window.k_seconds;
  s.fps = window.fps;
  return s;
}

SyntheticConfig RunConfig::MakeSynthetic() const {
  SyntheticConfig s = synth;
  s.seed = seed;
  s.coupling = ParseLabelCoupling(coupling_name);
  return s;
}

std::string RunConfig::ToJson() const {
  json j = json::object();
  for (const auto& f : Fields()) j[f.name] = f.get(*this);
  return j.dump(2);
}

const std::vector<ConfigKey>& ConfigKeys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& f : Fields()) out.push_back({f.name, f.description});
    return out;
  }();
  return keys;
}

void ApplyConfigJson(RunConfig& cfg, std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kConfigError, "config must be a flat JSON object");
  for (const auto& [key, value] : j.items()) {
    const Field* f = Find(key);
    if (!f) throw Error(ErrorCode::kConfigError, "unknown config key '" + key + "'");
    try {
      f->set(cfg, value);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfigError, "bad value for '" + key + "': " + e.what());
    }
  }
}

void ApplyConfigFile(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kConfigError, "cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  ApplyConfigJson(cfg, ss.str());
}

void SetConfigValue(RunConfig& cfg, std::string_view key, std::string_view value) {
  const Field* f = Find(key);
  if (!f) throw Error(ErrorCode::kConfigError, "unknown config key '" + std::string(key) + "'");
  json v;
  if (f->is_string) {
    v = std::string(value);
  } else {
    try {
      v = json::parse(value);
    } catch (const json::exception&) {
      if (!f->get(cfg).is_array())
        throw Error(ErrorCode::kConfigError, "bad value for '" + std::string(key) + "': '" + std::string(value) + "'");
      // Lists may be given as comma-separated words.
      json arr = json::array();
      std::string item;
      std::istringstream is{std::string(value)};
      while (std::getline(is, item, ',')) arr.push_back(item);
      v = arr;
    }
  }
  try {
    f->set(cfg, v);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, "bad value for '" + std::string(key) + "': " + e.what());
  }
}

std::filesystem::path ResolveOutDir(const RunConfig& cfg) {
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  if (const char* env = std::getenv("SONNET_OUT"); env && *env) return env;
  return "sonnet_out";
}

}  // namespace sonnet
