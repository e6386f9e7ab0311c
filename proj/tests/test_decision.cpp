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


#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "sonnet/decision.hpp"
#include "sonnet/errors.hpp"
#include "sonnet/pipeline.hpp"
#include "sonnet/synthetic.hpp"

using namespace sonnet;

namespace {

SessionAnnotations Empty(std::int64_t duration_ms) {
  SessionAnnotations s;
  s.session_id = "D";
  s.duration_ms = duration_ms;
  return s;
}

SessionAnnotations WithMouthOpen(std::vector<std::int64_t> at, std::int64_t duration_ms) {
  auto s = Empty(duration_ms);
  for (auto t : at) s.seat_events(1).push_back({EventKind::kMouthOpen, EventValue::kNone, t, t + 800});
  Canonicalize(s);
  return s;
}

std::vector<FeatureStream> Streams(std::int64_t duration_ms) {
  std::vector<FeatureStream> out;
  for (int seat = 1; seat <= 3; ++seat) {
    FeatureStream s;
    s.seat = seat;
    for (std::int64_t i = 0; FrameTimestamp(i, 15) < duration_ms; ++i) {
      FrameFeatures f;
      f.t_ms = FrameTimestamp(i, 15);
      s.frames.push_back(f);
    }
    out.push_back(std::move(s));
  }
  return out;
}

TrainedModel ConstantModel(double logit_zero) {
  ModelSpec spec = ModelSpec::Reduced(ModelVariant::kTripletSonnet);
  spec.layout.gamma = 2;
  TrainedModel m(spec);
  if (logit_zero != 0)
    for (auto* p : m.Params())
      if (p->name.rfind("head.out", 0) == 0) p->value.setZero();
  return m;
}

}  // namespace

TEST_CASE("fixed interval wait") {
  CHECK(FixedIntervalWait({9.9, 5, 5}) == 44.5);
  CHECK(FixedIntervalWait({9.9, 1, 0}) == 9.9);
  CHECK(FixedIntervalWait({9.9, 2, 3}) == doctest::Approx(16.8));
  try {
    FixedIntervalWait({1, 1, 2});
    FAIL("expected NonPositiveResult");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonPositiveResult);
  }
}

TEST_CASE("time since last bite rescaling") {
  CHECK(RescaleTimeSinceBite({50, 3}, 5) == BiteFeatures{10, 3});
  CHECK(RescaleTimeSinceBite({50, 3}, 1) == BiteFeatures{50, 3});
  CHECK_THROWS_AS(RescaleTimeSinceBite({50, 3}, 0), Error);
}

TEST_CASE("fixed interval schedule") {
  StrategyConfig cfg;
  cfg.transfer_s = 0;
  auto log = RunStrategy(Empty(200000), {}, nullptr, cfg);
  CHECK(log.FeedTimes() == std::vector<std::int64_t>{44500, 89000, 133500, 178000});

  cfg.transfer_s = 9;
  log = RunStrategy(Empty(600000), {}, nullptr, cfg);
  const auto feeds = log.FeedTimes();
  REQUIRE(feeds.size() > 3);
  for (std::size_t i = 1; i < feeds.size(); ++i) CHECK(feeds[i] - feeds[i - 1] == 53500);
  CHECK(log.Summary().mean_inter_feed_s == doctest::Approx(53.5));
}

TEST_CASE("mouth open schedule") {
  StrategyConfig cfg;
  cfg.strategy = Strategy::kMouthOpen;
  cfg.transfer_s = 9;
  auto log = RunStrategy(WithMouthOpen({12000, 15000, 80000}, 120000), {}, nullptr, cfg);
  CHECK(log.FeedTimes() == std::vector<std::int64_t>{12000, 80000});
  // A prompt precedes every feed.
  std::int64_t last_prompt = -1;
  for (const auto& e : log.events) {
    if (e.type == "prompt") last_prompt = e.t_ms;
    if (e.type == "feed_trigger") CHECK((last_prompt >= 0 && last_prompt <= e.t_ms));
  }
  CHECK(log.events.front().type == "prompt");
  CHECK(log.events.front().t_ms == 0);

  cfg.transfer_s = 0;
  log = RunStrategy(WithMouthOpen({5000, 5000 + 1, 9000}, 20000), {}, nullptr, cfg);
  CHECK(log.FeedTimes() == std::vector<std::int64_t>{5000, 5001, 9000});

  try {
    RunStrategy(Empty(1000), {}, nullptr, cfg);
    FAIL("expected MissingMouthEvents");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingMouthEvents);
  }
}

TEST_CASE("learned strategy cadence") {
  StrategyConfig cfg;
  cfg.strategy = Strategy::kLearned;
  try {
    RunStrategy(Empty(1000), {}, nullptr, cfg);
    FAIL("expected MissingModel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingModel);
  }

  const auto streams = Streams(60000);
  TrainedModel always(ModelSpec::Default(ModelVariant::kAlwaysFeed));
  cfg.transfer_s = 9;
  auto log = RunStrategy(Empty(60000), streams, &always, cfg);
  const auto feeds = log.FeedTimes();
  REQUIRE(!feeds.empty());
  CHECK(feeds.front() == 6000);
  // Ticks at 3 s and transfer suppression: 6 s feed, busy until 15 s.
  CHECK(feeds == std::vector<std::int64_t>{6000, 15000, 24000, 33000, 42000, 51000, 60000});
  CHECK(log.events[0].type == "skip");
  CHECK(log.events[0].cause == "buffer_filling");
  for (const auto& e : log.events) {
    if (e.score) CHECK(e.t_ms >= 6000);
    if (e.type == "feed_trigger") CHECK(*e.score >= 0.5);
  }

  cfg.sample_period_s = 4;
  log = RunStrategy(Empty(60000), streams, &always, cfg);
  CHECK(log.FeedTimes().front() == 8000);
}

TEST_CASE("learned strategy respects the threshold") {
  const auto streams = Streams(30000);
  auto half = ConstantModel(1);  // zeroed output layer: score 0.5
  StrategyConfig cfg;
  cfg.strategy = Strategy::kLearned;
  cfg.transfer_s = 0;
  cfg.threshold = 0.6;
  auto log = RunStrategy(Empty(30000), streams, &half, cfg);
  CHECK(log.FeedTimes().empty());
  CHECK(log.Summary().evaluations == 9);  // ticks 6 s .. 30 s
  cfg.threshold = 0.5;
  log = RunStrategy(Empty(30000), streams, &half, cfg);
  CHECK(log.FeedTimes().size() == 9);
}

TEST_CASE("learned strategy sees the rescaled replay bite clock") {
  // Linear model reading only the last frame's time-since-bite column:
  // logit = time_since - 4, so it feeds once the (rescaled) clock reaches 4 s.
  const auto streams = Streams(50000);
  ModelSpec spec = ModelSpec::Default(ModelVariant::kLinearSgd);
  spec.layout.gamma = 1;
  TrainedModel m(spec);
  const Eigen::Index time_col = (spec.frames() - 1) * spec.layout.user_cols() + spec.layout.bite_offset();
  for (auto* p : m.Params()) {
    if (p->name == "linear.w") {
      p->value.setZero();
      p->value(0, time_col) = 1.0;
    }
    if (p->name == "linear.b") p->value.setConstant(-4.0);
  }
  StrategyConfig cfg;
  cfg.strategy = Strategy::kLearned;
  cfg.transfer_s = 0;
  // Ticks see the frame 67 ms before them. Factor 5: 4 s rescaled = 20 s real,
  // and the clock restarts at each simulated feed.
  auto log = RunStrategy(Empty(50000), streams, &m, cfg);
  CHECK(log.FeedTimes() == std::vector<std::int64_t>{21000, 42000});
  cfg.time_rescale_factor = 1;
  log = RunStrategy(Empty(50000), streams, &m, cfg);
  CHECK(log.FeedTimes() == std::vector<std::int64_t>{6000, 12000, 18000, 24000, 30000, 36000, 42000, 48000});
}

TEST_CASE("replay logs are deterministic and versioned") {
  SyntheticConfig sc;
  sc.seed = 3;
  sc.duration_s = 120;
  const auto syn = GenerateSyntheticSession(sc);
  const auto streams = PrepareStreams(syn.streams, {}, syn.annotations, 15);
  auto model = ConstantModel(0);
  for (auto strategy : {Strategy::kFixedInterval, Strategy::kMouthOpen, Strategy::kLearned}) {
    StrategyConfig cfg;
    cfg.strategy = strategy;
    const auto a = RunStrategy(syn.annotations, streams, &model, cfg).ToJsonLines();
    const auto b = RunStrategy(syn.annotations, streams, &model, cfg).ToJsonLines();
    CHECK(a == b);
    std::istringstream in(a);
    std::string line;
    std::getline(in, line);
    const auto head = nlohmann::json::parse(line);
    CHECK(head["schema"] == "sonnet.decision_log");
    CHECK(head["version"] == DecisionLog::kSchemaVersion);
    CHECK(head["strategy"] == std::string(ToString(strategy)));
    std::int64_t last_feed = -1;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line);
      if (j["type"] == "feed_trigger") {
        CHECK(j["t_ms"].get<std::int64_t>() > last_feed);
        last_feed = j["t_ms"];
      }
    }
  }
}

TEST_CASE("summary csv") {
  StrategyConfig cfg;
  cfg.transfer_s = 0;
  std::vector<DecisionLog> logs = {RunStrategy(Empty(200000), {}, nullptr, cfg)};
  std::ostringstream os;
  WriteDecisionSummaryCsv(os, logs);
  CHECK(os.str() == "session_id,target_seat,strategy,feeds,evaluations,mean_inter_feed_s\n"
                    "D,1,fixed_interval,4,0,44.5\n");
}

TEST_CASE("strategy config validation") {
  StrategyConfig cfg;
  cfg.sample_period_s = 7;
  CHECK_THROWS_AS(cfg.Validate(), Error);
  CHECK_THROWS_AS(ParseStrategy("telepathic"), Error);
  CHECK(ParseStrategy("mouth_open") == Strategy::kMouthOpen);
}
