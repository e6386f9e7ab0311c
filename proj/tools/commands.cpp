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

// Session files are found by name: <id>.annotations.csv, <id>.features.csv
// and <id>.audio.csv. A path given for a single session may be a plain file.

#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "sonnet/analytics.hpp"
#include "sonnet/decision.hpp"
#include "sonnet/errors.hpp"
#include "sonnet/features.hpp"
#include "sonnet/pipeline.hpp"
#include "sonnet/synthetic.hpp"
#include "sonnet/training.hpp"
#include "sonnet/window_archive.hpp"

namespace sonnet::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::string_view kAnnSuffix = ".annotations.csv";
constexpr std::string_view kFeatSuffix = ".features.csv";
constexpr std::string_view kAudioSuffix = ".audio.csv";

std::ofstream OpenOut(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIOFailure, "cannot write " + p.string());
  return os;
}

void WriteText(const fs::path& p, const std::string& text) { OpenOut(p) << text; }

void PrepareOut(const Invocation& inv) {
  std::error_code ec;
  fs::create_directories(inv.out, ec);
  if (ec) throw Error(ErrorCode::kIOFailure, "cannot create " + inv.out.string() + ": " + ec.message());
  // The echo leaves out the output directory so that two runs differing only
  // in where they write produce identical trees.
  auto j = json::parse(inv.config.ToJson());
  j.erase("out");
  WriteText(inv.out / "config.json", j.dump(2) + "\n");
}

std::string Require(const std::string& value, const char* key) {
  if (value.empty()) throw Error(ErrorCode::kConfigError, std::string("missing required setting '") + key + "'");
  return value;
}

std::vector<fs::path> AnnotationFiles(const RunConfig& c) {
  const fs::path base = Require(c.annotations, "annotations");
  if (!fs::exists(base)) throw Error(ErrorCode::kIOFailure, "no such file or directory: " + base.string());
  if (!fs::is_directory(base)) return {base};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(base)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.ends_with(kAnnSuffix)) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(ErrorCode::kIOFailure, "no *" + std::string(kAnnSuffix) + " files in " + base.string());
  return out;
}

// Empty path when the companion file is absent.
fs::path Companion(const std::string& base, const std::string& sid, std::string_view suffix) {
  if (base.empty()) return {};
  const fs::path p = fs::is_directory(base) ? fs::path(base) / (sid + std::string(suffix)) : fs::path(base);
  return fs::exists(p) ? p : fs::path{};
}

struct SessionData {
  SessionAnnotations ann;
  std::vector<FeatureStream> raw;
  std::vector<AudioFrame> audio;
};

std::vector<SessionData> LoadSessions(const RunConfig& c, bool with_streams) {
  std::vector<SessionData> out;
  for (const auto& f : AnnotationFiles(c)) {
    SessionData s;
    s.ann = ParseAnnotations(f);
    if (with_streams) {
      const auto feat = Companion(Require(c.features, "features"), s.ann.session_id, kFeatSuffix);
      if (feat.empty())
        throw Error(ErrorCode::kIOFailure, "no feature file for session " + s.ann.session_id);
      s.raw = ReadFeatureStreams(feat);
      if (const auto au = Companion(c.audio, s.ann.session_id, kAudioSuffix); !au.empty())
        s.audio = ReadAudioFrames(au);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<FeatureStream> Prepared(const SessionData& s, const RunConfig& c) {
  return PrepareStreams(s.raw, s.audio, s.ann, c.window.fps);
}

WindowArchive LoadWindows(const RunConfig& c, std::vector<DroppedWindow>* dropped = nullptr) {
  if (!c.windows.empty()) return ReadWindowArchive(c.windows);
  c.window.Validate();
  WindowArchive a{c.window, c.Layout(), {}};
  for (const auto& s : LoadSessions(c, true)) {
    auto ex = ExtractWindows(s.ann, Prepared(s, c), c.window, a.layout);
    for (auto& w : ex.windows) a.windows.push_back(std::move(w));
    if (dropped) dropped->insert(dropped->end(), ex.dropped.begin(), ex.dropped.end());
  }
  return a;
}

ModelSpec SpecFor(const RunConfig& c, const WindowArchive& a) {
  ModelSpec s = c.MakeModelSpec();
  s.layout = a.layout;
  s.k_seconds = a.spec.k_seconds;
  s.fps = a.spec.fps;
  return s;
}

std::vector<std::vector<FeatureGroup>> ParseMasks(const std::vector<std::string>& masks) {
  std::vector<std::vector<FeatureGroup>> out;
  if (masks.empty()) {
    for (auto g : {FeatureGroup::kSpeaking, FeatureGroup::kGazeHead, FeatureGroup::kBite, FeatureGroup::kBodyFace})
      out.push_back({g});
    return out;
  }
  for (const auto& m : masks) {
    std::vector<FeatureGroup> groups;
    std::istringstream is(m);
    std::string part;
    while (std::getline(is, part, '+')) groups.push_back(ParseFeatureGroup(part));
    out.push_back(std::move(groups));
  }
  return out;
}

void WriteReports(const fs::path& dir, const std::string& stem, std::span<const CVReport> reports) {
  auto os = OpenOut(dir / (stem + ".csv"));
  WriteReportCsv(os, reports);
  WriteText(dir / (stem + ".json"), ReportJson(reports) + "\n");
}

void PrintSummary(std::span<const CVReport> reports) {
  for (const auto& r : reports)
    std::cout << r.name << ": folds " << r.folds.size() << ", mean nmcc " << r.mean.nmcc << ", pooled nmcc "
              << r.pooled.nmcc << '\n';
}

// ---- commands -------------------------------------------------------------

void Ingest(const Invocation& inv) {
  json report = json::array();
  std::size_t total = 0;
  for (const auto& f : AnnotationFiles(inv.config)) {
    auto s = ParseAnnotations(f);
    Canonicalize(s);
    WriteAnnotations(s, inv.out / (s.session_id + std::string(kAnnSuffix)));
    const auto v = ValidateSession(s);
    json issues = json::array();
    for (const auto& x : v.violations)
      issues.push_back({{"seat", x.seat}, {"rule", x.rule}, {"message", x.message}, {"events", x.event_indices}});
    report.push_back({{"session_id", s.session_id}, {"events", s.total_events()}, {"violations", issues}});
    total += v.size();
    std::cout << s.session_id << ": " << s.total_events() << " events, " << v.size() << " violations\n";
  }
  WriteText(inv.out / "validation.json", report.dump(2) + "\n");
  if (total > 0) std::cout << "see validation.json\n";
}

void Synth(const Invocation& inv) {
  const auto cfg = inv.config.MakeSynthetic();
  cfg.Validate();
  for (int i = 0; i < cfg.n_sessions; ++i) {
    const auto s = GenerateSyntheticSession(cfg, i);
    const auto& id = s.annotations.session_id;
    WriteAnnotations(s.annotations, inv.out / (id + std::string(kAnnSuffix)));
    WriteFeatureStreams(s.streams, inv.out / (id + std::string(kFeatSuffix)));
    WriteAudioFrames(s.audio, inv.out / (id + std::string(kAudioSuffix)));
    std::cout << id << ": " << s.annotations.total_events() << " events\n";
  }
}

void Features(const Invocation& inv) {
  for (const auto& s : LoadSessions(inv.config, true)) {
    const auto streams = Prepared(s, inv.config);
    WriteFeatureStreams(streams, inv.out / (s.ann.session_id + std::string(kFeatSuffix)));
    std::cout << s.ann.session_id << ": " << streams.size() << " streams at " << inv.config.window.fps << " fps\n";
  }
}

void Windows(const Invocation& inv) {
  std::vector<DroppedWindow> dropped;
  RunConfig c = inv.config;
  c.windows.clear();
  const auto a = LoadWindows(c, &dropped);
  WriteWindowArchive(inv.out / "windows.bin", a.spec, a.layout, a.windows);
  auto os = OpenOut(inv.out / "dropped.csv");
  WriteDropManifest(os, dropped);
  const auto pos = std::count_if(a.windows.begin(), a.windows.end(), [](const auto& w) { return w.label == 1; });
  std::cout << a.windows.size() << " windows (" << pos << " positive), " << dropped.size() << " dropped\n";
}

void TrainCmd(const Invocation& inv) {
  const auto a = LoadWindows(inv.config);
  const auto spec = SpecFor(inv.config, a);
  std::vector<LabeledWindow> train, val;
  for (const auto& s : GroupBySession(a.windows)) SplitTail(s.windows, inv.config.train.validation_fraction, train, val);
  const auto r = Train(spec, train, val, inv.config.train);
  SaveCheckpoint(r.model, inv.out / "model.ckpt");
  auto os = OpenOut(inv.out / "history.csv");
  os << "epoch,train_loss,val_loss\n";
  for (const auto& h : r.history) os << h.epoch << ',' << h.train_loss << ',' << h.val_loss << '\n';
  std::cout << "trained " << ToString(spec.variant) << " on " << train.size() << " windows, best epoch "
            << r.model.metadata.best_epoch << " of " << r.model.metadata.epochs_run << '\n';
}

void Loso(const Invocation& inv) {
  const auto a = LoadWindows(inv.config);
  const auto spec = SpecFor(inv.config, a);
  const auto sessions = GroupBySession(a.windows);
  const std::vector<CVReport> reports{LosoEvaluate(spec, sessions, inv.config.train, inv.config.model)};
  WriteReports(inv.out, "cv_report", reports);
  PrintSummary(reports);
}

void Ablate(const Invocation& inv) {
  const auto a = LoadWindows(inv.config);
  const auto spec = SpecFor(inv.config, a);
  const auto masks = ParseMasks(inv.config.masks);
  const auto rows = RunAblation(spec, GroupBySession(a.windows), masks, inv.config.train);
  std::vector<CVReport> reports;
  for (const auto& r : rows) reports.push_back(r.report);
  WriteReports(inv.out, "ablation", reports);
  PrintSummary(reports);
}

void MetricsCmd(const Invocation& inv) {
  const auto a = LoadWindows(inv.config);
  const auto model = LoadCheckpoint(Require(inv.config.model_path, "model_path"));
  const auto scores = model.Scores(std::span<const LabeledWindow>(a.windows));
  std::vector<std::uint8_t> pred, label;
  auto os = OpenOut(inv.out / "scores.csv");
  os << "session_id,target_seat,anchor_ms,label,score\n";
  for (std::size_t i = 0; i < a.windows.size(); ++i) {
    const auto& w = a.windows[i];
    pred.push_back(scores[i] >= 0.5);
    label.push_back(w.label);
    os << w.session_id << ',' << w.target_seat << ',' << w.anchor_ms << ',' << int(w.label) << ',' << scores[i]
       << '\n';
  }
  const auto m = ComputeMetrics(pred, label);
  const json j{{"n", a.windows.size()}, {"accuracy", m.accuracy}, {"precision", m.precision},
               {"recall", m.recall},    {"f1", m.f1},             {"mcc", m.mcc},
               {"nmcc", m.nmcc}};
  WriteText(inv.out / "metrics.json", j.dump(2) + "\n");
  std::cout << j.dump() << '\n';
}

void Simulate(const Invocation& inv) {
  const auto st = inv.config.MakeStrategy();
  st.Validate();
  const bool learned = st.strategy == Strategy::kLearned;
  std::optional<TrainedModel> model;
  if (learned && !inv.config.model_path.empty()) model.emplace(LoadCheckpoint(inv.config.model_path));
  std::vector<DecisionLog> logs;
  for (const auto& s : LoadSessions(inv.config, learned)) {
    const auto streams = learned ? Prepared(s, inv.config) : std::vector<FeatureStream>{};
    auto log = RunStrategy(s.ann, streams, model ? &*model : nullptr, st);
    WriteText(inv.out / (s.ann.session_id + ".decisions.jsonl"), log.ToJsonLines());
    const auto sum = log.Summary();
    std::cout << s.ann.session_id << ": " << sum.feeds << " feeds, mean gap " << sum.mean_inter_feed_s << " s\n";
    logs.push_back(std::move(log));
  }
  auto os = OpenOut(inv.out / "decision_summary.csv");
  WriteDecisionSummaryCsv(os, logs);
}

void Stats(const Invocation& inv) {
  std::vector<SessionAnnotations> ann;
  for (auto& s : LoadSessions(inv.config, false)) ann.push_back(std::move(s.ann));
  const auto r = FullStats(ann);
  const auto files = EmitReport(r, inv.config.report_format, inv.out);
  std::cout << r.total_events << " events, " << files.size() << " files written\n";
}

// Collects the mean and pooled rows of saved CV / ablation reports into one
// table.
void Report(const Invocation& inv) {
  if (inv.inputs.empty()) throw Error(ErrorCode::kConfigError, "report needs one or more report JSON files");
  auto csv = OpenOut(inv.out / "summary.csv");
  std::ostringstream md;
  csv << "source,name,aggregate,accuracy,precision,recall,f1,nmcc\n";
  md << "| source | name | aggregate | accuracy | f1 | nmcc |\n|---|---|---|---|---|---|\n";
  for (const auto& in : inv.inputs) {
    std::ifstream is(in);
    if (!is) throw Error(ErrorCode::kIOFailure, "cannot read " + in);
    json j;
    try {
      j = json::parse(is);
      const auto src = fs::path(in).filename().string();
      for (const auto& r : j)
        for (const char* agg : {"mean", "pooled"}) {
          const auto& m = r.at(agg);
          const std::string name = r.at("model");
          csv << src << ',' << name << ',' << agg << ',' << m.at("acc").get<double>() << ','
              << m.at("prec").get<double>() << ',' << m.at("rec").get<double>() << ','
              << m.at("f1").get<double>() << ',' << m.at("nmcc").get<double>() << '\n';
          md << "| " << src << " | " << name << " | " << agg << " | " << m.at("acc").get<double>() << " | "
             << m.at("f1").get<double>() << " | " << m.at("nmcc").get<double>() << " |\n";
        }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormatError, in + " is not a report: " + e.what());
    }
  }
  WriteText(inv.out / "summary.md", md.str());
  std::cout << md.str();
}

}  // namespace

void Dispatch(const Invocation& inv) {
  static const std::map<std::string, void (*)(const Invocation&)> table = {
      {"ingest", Ingest},   {"synth", Synth},     {"features", Features}, {"windows", Windows},
      {"train", TrainCmd},  {"loso", Loso},       {"ablate", Ablate},     {"metrics", MetricsCmd},
      {"simulate", Simulate}, {"stats", Stats},   {"report", Report}};
  const auto it = table.find(inv.command);
  if (it == table.end()) throw Error(ErrorCode::kUnknownCommand, "unknown command '" + inv.command + "'");
  PrepareOut(inv);
  it->second(inv);
}

}  // namespace sonnet::cli
