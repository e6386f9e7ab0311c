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

// Offline replay of bite-timing strategies over a recorded session.
// Simulated time is integer milliseconds so schedules are exact.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sonnet/annotations.hpp"
#include "sonnet/features.hpp"
#include "sonnet/models.hpp"

namespace sonnet {

enum class Strategy { kLearned, kFixedInterval, kMouthOpen };

std::string_view ToString(Strategy s);
// "learned", "fixed_interval", "mouth_open"; throws Error{InvalidConfig}.
Strategy ParseStrategy(std::string_view name);

struct RobotTimingParams {
  double human_enter_to_lift_s = 9.9;
  double robot_speed_factor = 5.0;
  double acquisition_to_wait_s = 5.0;
};

// human_enter_to_lift * robot_speed_factor - acquisition_to_wait.
// Throws Error{NonPositiveResult} (and Error{InvalidArgument} for
// non-positive inputs).
double FixedIntervalWait(const RobotTimingParams& p);

// time_since / factor; count unchanged. Throws Error{InvalidArgument} for
// factor <= 0.
BiteFeatures RescaleTimeSinceBite(const BiteFeatures& b, double factor);

struct StrategyConfig {
  Strategy strategy = Strategy::kFixedInterval;
  int target_seat = 1;
  double sample_period_s = 3.0;
  double window_k_s = 6.0;
  int fps = 15;
  double fixed_wait_s = 44.5;
  double time_rescale_factor = 5.0;
  double transfer_s = 9.0;  // feed trigger to feed completion
  double threshold = 0.5;
  bool suppress_during_transfer = true;
  std::string prompt_text = "Please open your mouth when you are ready for a bite.";

  void Validate() const;  // throws Error{InvalidConfig}
};

struct DecisionEvent {
  std::int64_t t_ms = 0;
  std::string type;  // "tick", "skip", "prompt", "feed_trigger", "feed_complete"
  std::optional<double> score;
  std::string cause;
  int trial = 0;
};

struct DecisionSummary {
  int feeds = 0;
  int evaluations = 0;
  double mean_inter_feed_s = 0.0;  // 0 with fewer than two feeds
};

struct DecisionLog {
  static constexpr int kSchemaVersion = 1;

  std::string session_id;
  Strategy strategy = Strategy::kFixedInterval;
  int target_seat = 1;
  std::int64_t duration_ms = 0;
  std::vector<DecisionEvent> events;

  std::vector<std::int64_t> FeedTimes() const;
  DecisionSummary Summary() const;
  // Header record followed by one record per event.
  std::string ToJsonLines() const;
};

// `streams` (one per seat at cfg.fps) are only read by the learned strategy.
// Throws Error{MissingModel} or Error{MissingMouthEvents}.
DecisionLog RunStrategy(const SessionAnnotations& session, std::span<const FeatureStream> streams,
                        const TrainedModel* model, const StrategyConfig& cfg);

// session_id,target_seat,strategy,feeds,evaluations,mean_inter_feed_s
void WriteDecisionSummaryCsv(std::ostream& os, std::span<const DecisionLog> logs);

}  // namespace sonnet
