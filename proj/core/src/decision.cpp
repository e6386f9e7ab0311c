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

#include "sonnet/decision.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <ostream>

#include "sonnet/errors.hpp"
#include "sonnet/pipeline.hpp"
#include "text_util.hpp"

namespace sonnet {

std::string_view ToString(Strategy s) {
  switch (s) {
    case Strategy::kLearned: return "learned";
    case Strategy::kFixedInterval: return "fixed_interval";
    case Strategy::kMouthOpen: return "mouth_open";
  }
  return "?";
}

Strategy ParseStrategy(std::string_view name) {
  if (name == "learned") return Strategy::kLearned;
  if (name == "fixed_interval") return Strategy::kFixedInterval;
  if (name == "mouth_open") return Strategy::kMouthOpen;
  throw Error(ErrorCode::kInvalidConfig, "unknown strategy '" + std::string(name) + "'");
}

double FixedIntervalWait(const RobotTimingParams& p) {
  if (!(p.human_enter_to_lift_s > 0) || !(p.robot_speed_factor > 0) || p.acquisition_to_wait_s < 0)
    throw Error(ErrorCode::kInvalidArgument, "timing parameters must be positive");
  const double wait = p.human_enter_to_lift_s * p.robot_speed_factor - p.acquisition_to_wait_s;
  if (!(wait > 0)) throw Error(ErrorCode::kNonPositiveResult, "fixed-interval wait is not positive");
  return wait;
}

BiteFeatures RescaleTimeSinceBite(const BiteFeatures& b, double factor) {
  if (!(factor > 0)) throw Error(ErrorCode::kInvalidArgument, "rescale factor must be positive");
  return {b.seconds_since_last / factor, b.count};
}

void StrategyConfig::Validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, m); };
  if (!(sample_period_s > 0) || !(window_k_s > 0)) fail("sample period and window must be positive");
  if (sample_period_s > window_k_s) fail("sample period must not exceed the window length");
  if (fps <= 0) fail("fps must be positive");
  if (!(fixed_wait_s > 0)) fail("fixed_wait_s must be positive");
  if (!(time_rescale_factor > 0)) fail("time_rescale_factor must be positive");
  if (transfer_s < 0) fail("transfer_s must be >= 0");
  if (target_seat < 1 || target_seat > kNumSeats) fail("target_seat must be 1..3");
}

namespace {

std::int64_t Ms(double seconds) { return std::llround(seconds * 1000.0); }

class Replay {
 public:
  Replay(const SessionAnnotations& session, const StrategyConfig& cfg) : cfg_(cfg) {
    log_.session_id = session.session_id;
    log_.strategy = cfg.strategy;
    log_.target_seat = cfg.target_seat;
    log_.duration_ms = session.duration_ms;
  }

  void Emit(std::int64_t t, std::string type, std::string cause, std::optional<double> score = {}) {
    log_.events.push_back({t, std::move(type), score, std::move(cause), trial_});
  }

  // Records a feed at `t`; returns the completion time.
  std::int64_t Feed(std::int64_t t, std::string cause, std::optional<double> score = {}) {
    Emit(t, "feed_trigger", std::move(cause), score);
    const std::int64_t done = t + Ms(cfg_.transfer_s);
    completions_.push_back(done);
    if (done <= log_.duration_ms) Emit(done, "feed_complete", "transfer_done");
    ++trial_;
    return done;
  }

  const std::vector<std::int64_t>& completions() const { return completions_; }
  DecisionLog Finish() { return std::move(log_); }

 private:
  const StrategyConfig& cfg_;
  DecisionLog log_;
  std::vector<std::int64_t> completions_;
  int trial_ = 1;
};

void RunFixed(Replay& r, const SessionAnnotations& s, const StrategyConfig& cfg) {
  const std::int64_t wait = Ms(cfg.fixed_wait_s);
  std::int64_t start = 0;
  while (start + wait <= s.duration_ms) start = r.Feed(start + wait, "fixed_interval_elapsed");
}

void RunMouthOpen(Replay& r, const SessionAnnotations& s, const StrategyConfig& cfg) {
  const auto opens = s.StartTimes(cfg.target_seat, EventKind::kMouthOpen);
  if (opens.empty())
    throw Error(ErrorCode::kMissingMouthEvents,
                "session " + s.session_id + " has no mouth_open annotations for seat " +
                    std::to_string(cfg.target_seat));
  std::int64_t start = 0;
  auto it = opens.begin();
  while (start <= s.duration_ms) {
    r.Emit(start, "prompt", cfg.prompt_text);
    // Each mouth_open answers at most one prompt.
    it = std::lower_bound(it, opens.end(), start);
    if (it == opens.end() || *it > s.duration_ms) break;
    start = r.Feed(*it++, "mouth_open");
  }
}

void RunLearned(Replay& r, const SessionAnnotations& s, std::span<const FeatureStream> streams,
                const TrainedModel& model, const StrategyConfig& cfg) {
  WindowSpec ws;
  ws.k_seconds = cfg.window_k_s;
  ws.fps = cfg.fps;
  ws.Validate();
  if (ws.frames() != model.spec().frames())
    throw Error(ErrorCode::kShapeMismatch, "strategy window does not match the model's input length");
  const WindowLayout& layout = model.spec().layout;
  const std::int64_t period = Ms(cfg.sample_period_s);
  const std::int64_t k_ms = Ms(cfg.window_k_s);
  std::int64_t busy_until = 0;
  // Bite clock driven by simulated feed completions, rescaled for deployment.
  const BiteSource bite = [&](std::int64_t t) {
    return RescaleTimeSinceBite(ComputeBiteFeatures(r.completions(), t), cfg.time_rescale_factor);
  };
  for (std::int64_t t = period; t <= s.duration_ms; t += period) {
    if (t < k_ms) {
      r.Emit(t, "skip", "buffer_filling");
      continue;
    }
    if (cfg.suppress_during_transfer && t < busy_until) {
      r.Emit(t, "skip", "transfer_in_progress");
      continue;
    }
    LabeledWindow w;
    w.session_id = s.session_id;
    const std::string reason = AssembleWindow(streams, cfg.target_seat, t, ws, layout, bite, w);
    if (!reason.empty()) {
      r.Emit(t, "skip", reason);
      continue;
    }
    const double score = model.Forward(w).score;
    if (score >= cfg.threshold) {
      busy_until = r.Feed(t, "model_score", score);
    } else {
      r.Emit(t, "tick", "below_threshold", score);
    }
  }
}

}  // namespace

DecisionLog RunStrategy(const SessionAnnotations& session, std::span<const FeatureStream> streams,
                        const TrainedModel* model, const StrategyConfig& cfg) {
  cfg.Validate();
  Replay r(session, cfg);
  switch (cfg.strategy) {
    case Strategy::kFixedInterval: RunFixed(r, session, cfg); break;
    case Strategy::kMouthOpen: RunMouthOpen(r, session, cfg); break;
    case Strategy::kLearned:
      if (!model) throw Error(ErrorCode::kMissingModel, "the learned strategy needs a trained model");
      RunLearned(r, session, streams, *model, cfg);
      break;
  }
  return r.Finish();
}

std::vector<std::int64_t> DecisionLog::FeedTimes() const {
  std::vector<std::int64_t> out;
  for (const auto& e : events)
    if (e.type == "feed_trigger") out.push_back(e.t_ms);
  return out;
}

DecisionSummary DecisionLog::Summary() const {
  DecisionSummary s;
  const auto feeds = FeedTimes();
  s.feeds = static_cast<int>(feeds.size());
  for (const auto& e : events)
    if (e.score) ++s.evaluations;
  if (feeds.size() >= 2)
    s.mean_inter_feed_s = static_cast<double>(feeds.back() - feeds.front()) /
                          (1000.0 * static_cast<double>(feeds.size() - 1));
  return s;
}

std::string DecisionLog::ToJsonLines() const {
  std::string out;
  nlohmann::json head = {{"schema", "sonnet.decision_log"}, {"version", kSchemaVersion},
                         {"session_id", session_id},        {"strategy", ToString(strategy)},
                         {"target_seat", target_seat},      {"duration_ms", duration_ms}};
  out += head.dump() + '\n';
  for (const auto& e : events) {
    nlohmann::json j = {{"t_ms", e.t_ms}, {"type", e.type}, {"trial", e.trial}, {"cause", e.cause}};
    if (e.score) j["score"] = *e.score;
    out += j.dump() + '\n';
  }
  return out;
}

void WriteDecisionSummaryCsv(std::ostream& os, std::span<const DecisionLog> logs) {
  os << "session_id,target_seat,strategy,feeds,evaluations,mean_inter_feed_s\n";
  for (const auto& l : logs) {
    const auto s = l.Summary();
    os << l.session_id << ',' << l.target_seat << ',' << ToString(l.strategy) << ',' << s.feeds << ','
       << s.evaluations << ',' << text::FormatDouble(s.mean_inter_feed_s) << '\n';
  }
}

}  // namespace sonnet
