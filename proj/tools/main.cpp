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

// sonnet <command> [flags]. Errors go to stderr as one JSON object and the
// process exits with status 1 (2 for usage errors).

#include <CLI11.hpp>
#include <algorithm>
#include <iostream>
#include <json.hpp>

#include "commands.hpp"
#include "sonnet/errors.hpp"

namespace {

int Fail(const std::string& command, std::string_view code, const std::string& message, int status) {
  nlohmann::json j{{"error", code}, {"message", message}, {"command", command}};
  std::cerr << j.dump() << '\n';
  return status;
}

std::string Usage() {
  std::string s = "usage: sonnet <command> [--help] [flags]\ncommands:";
  for (const auto& c : sonnet::cli::CommandNames()) s += " " + c;
  return s + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  using namespace sonnet;
  if (argc < 2 || std::string(argv[1]) == "--help" || std::string(argv[1]) == "-h") {
    std::cout << Usage();
    return argc < 2 ? 2 : 0;
  }
  const std::string command = argv[1];
  const auto& names = cli::CommandNames();
  if (std::find(names.begin(), names.end(), command) == names.end())
    return Fail(command, ErrorCodeName(ErrorCode::kUnknownCommand), "unknown command '" + command + "'", 2);

  CLI::App app("sonnet " + command);
  std::string config_path, out;
  std::vector<std::string> sets, inputs;
  std::vector<std::pair<std::string, std::string>> flags;  // config key, raw value
  auto add = [&](const std::string& flag, const std::string& key, const std::string& help) {
    app.add_option_function<std::string>(flag, [&flags, key](const std::string& v) { flags.emplace_back(key, v); },
                                         help);
  };
  app.add_option("--config", config_path, "flat JSON config file");
  app.add_option("--out", out, "output directory (default: $SONNET_OUT, then sonnet_out)");
  add("--seed", "seed", "seed for every stochastic component");
  add("--model", "model", "model variant");
  add("--gamma", "gamma", "bite feature tiling factor");
  add("--k-seconds", "k_seconds", "window length in seconds");
  add("--fps", "fps", "model frame rate");
  add("--strategy", "strategy", "bite timing strategy");
  add("--jobs", "jobs", "parallel folds or sessions");
  add("--preset", "preset", "architecture preset: default or reduced");
  add("--sessions", "sessions", "synthetic sessions to generate");
  add("--coupling", "coupling", "synthetic label coupling");
  add("--annotations", "annotations", "annotation CSV file or directory");
  add("--features", "features", "feature CSV file or directory");
  add("--audio", "audio", "audio CSV file or directory");
  add("--windows", "windows", "window archive");
  add("--model-path", "model_path", "model checkpoint");
  add("--format", "report_format", "stats report format");
  app.add_option_function<std::string>(
      "--data",
      [&flags](const std::string& v) {
        for (const char* k : {"annotations", "features", "audio"}) flags.emplace_back(k, v);
      },
      "directory holding annotations, features and audio of every session");
  app.add_option("--set", sets, "key=value override for any config key")->allow_extra_args(false);
  app.add_option("inputs", inputs, "input files (report)");

  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    std::cout << "config keys:\n";
    for (const auto& k : ConfigKeys()) std::cout << "  " << k.name << "  " << k.description << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    return Fail(command, ErrorCodeName(ErrorCode::kConfigError), e.what(), 2);
  }

  try {
    cli::Invocation inv;
    inv.command = command;
    if (!config_path.empty()) ApplyConfigFile(inv.config, config_path);
    for (const auto& [key, value] : flags) SetConfigValue(inv.config, key, value);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::kConfigError, "--set expects key=value, got '" + kv + "'");
      SetConfigValue(inv.config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!out.empty()) inv.config.out_dir = out;
    inv.config.PropagateSeed();
    inv.out = ResolveOutDir(inv.config);
    inv.inputs = inputs;
    cli::Dispatch(inv);
  } catch (const Error& e) {
    return Fail(command, ErrorCodeName(e.code()), e.what(), 1);
  } catch (const std::exception& e) {
    return Fail(command, "Internal", e.what(), 1);
  }
  return 0;
}
