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

#include <numeric>

#include "sonnet/analytics.hpp"
#include "sonnet/errors.hpp"
#include "test_support.hpp"

using namespace sonnet;

namespace {

AnnotationEvent Ev(EventKind k, std::int64_t start, std::int64_t end, EventValue v = EventValue::kFork) {
  return AnnotationEvent{k, v, start, end};
}

// Three lifts 30 s apart and two of the matching to_mouth annotations.
SessionAnnotations Toy() {
  SessionAnnotations s;
  s.session_id = "T1";
  s.duration_ms = 180000;
  s.seat_events(1) = {Ev(EventKind::kFoodLifted, 10000, 10400), Ev(EventKind::kFoodToMouth, 11000, 11800),
                      Ev(EventKind::kFoodLifted, 40000, 40400), Ev(EventKind::kFoodToMouth, 42000, 43000),
                      Ev(EventKind::kFoodLifted, 70000, 70400)};
  return s;
}

std::int64_t CountOf(const StatsReport& r, EventKind k) {
  for (const auto& c : r.counts)
    if (c.kind == k && !c.value) return c.count;
  return -1;
}

const DurationRow* DurationOf(const StatsReport& r, EventKind k, std::optional<EventValue> v = std::nullopt) {
  for (const auto& d : r.durations)
    if (d.kind == k && d.value == v) return &d;
  return nullptr;
}

}  // namespace

TEST_CASE("annotation stats on the toy session") {
  const std::vector<SessionAnnotations> s{Toy()};
  const auto r = AnnotationStats(s);
  CHECK(r.total_events == 5);
  CHECK(CountOf(r, EventKind::kFoodLifted) == 3);
  CHECK(CountOf(r, EventKind::kFoodToMouth) == 2);
  CHECK(CountOf(r, EventKind::kMouthOpen) == 0);
  const auto* d = DurationOf(r, EventKind::kFoodToMouth);
  REQUIRE(d);
  CHECK(d->seconds.n == 2);
  CHECK(d->seconds.mean == 0.9);
  CHECK(d->seconds.std == doctest::Approx(0.1).epsilon(1e-12));
  const auto* fork = DurationOf(r, EventKind::kFoodToMouth, EventValue::kFork);
  REQUIRE(fork);
  CHECK(fork->seconds.n == 2);
  // Onset annotations carry no duration rows.
  CHECK(DurationOf(r, EventKind::kFoodLifted) == nullptr);
  CHECK(DurationOf(r, EventKind::kMouthOpen) != nullptr);
}

TEST_CASE("empty session gives zero counts") {
  SessionAnnotations e;
  e.session_id = "E";
  const std::vector<SessionAnnotations> s{e};
  const auto r = AnnotationStats(s);
  CHECK(r.total_events == 0);
  for (const auto& c : r.counts) CHECK(c.count == 0);
  for (const auto& d : r.durations) CHECK(d.seconds.n == 0);
}

TEST_CASE("gap stats on the toy session") {
  const std::vector<SessionAnnotations> s{Toy()};
  const auto lifts = GapStats(s, EventKind::kFoodLifted, EventKind::kFoodLifted);
  REQUIRE(lifts);
  CHECK(lifts->n == 2);
  CHECK(lifts->mean == 30.0);
  CHECK(lifts->std == 0.0);
  const auto lift_mouth = GapStats(s, "food_lifted", "food_to_mouth");
  REQUIRE(lift_mouth);
  CHECK(lift_mouth->n == 2);
  CHECK(lift_mouth->mean == 1.5);
  CHECK(lift_mouth->std == 0.5);
  const auto mouth = GapStats(s, EventKind::kFoodToMouth, EventKind::kFoodToMouth);
  REQUIRE(mouth);
  CHECK(mouth->n == 1);
  CHECK(mouth->mean == 31.0);
  CHECK_FALSE(GapStats(s, EventKind::kDrinkLifted, EventKind::kDrinkLifted));
}

TEST_CASE("single event gives an absent gap statistic") {
  SessionAnnotations s;
  s.duration_ms = 60000;
  s.seat_events(2) = {Ev(EventKind::kFoodLifted, 5000, 5400)};
  const std::vector<SessionAnnotations> v{s};
  CHECK_FALSE(GapStats(v, EventKind::kFoodLifted, EventKind::kFoodLifted));
  CHECK(GapSamples(v, EventKind::kFoodLifted, EventKind::kFoodLifted).empty());
}

TEST_CASE("unknown kind names") {
  const std::vector<SessionAnnotations> s{Toy()};
  try {
    GapStats(s, "food_lifted", "food_to_nose");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownKind);
  }
  CHECK_THROWS_AS(GapStats(s, "lifted", "food_to_mouth"), Error);
}

TEST_CASE("transition pairing is one to one") {
  SessionAnnotations s;
  s.duration_ms = 60000;
  // Two lifts before one to_mouth: the later lift pairs. The second to_mouth
  // has no lift since the previous to_mouth and is skipped.
  s.seat_events(1) = {Ev(EventKind::kFoodLifted, 10000, 10400), Ev(EventKind::kFoodLifted, 12000, 12400),
                      Ev(EventKind::kFoodToMouth, 13000, 13900), Ev(EventKind::kFoodToMouth, 14000, 14500)};
  const std::vector<SessionAnnotations> v{s};
  const auto g = GapSamples(v, EventKind::kFoodLifted, EventKind::kFoodToMouth);
  REQUIRE(g.size() == 1);
  CHECK(g[0] == 1.0);

  SUBCASE("values must agree") {
    SessionAnnotations t;
    t.duration_ms = 60000;
    t.seat_events(1) = {Ev(EventKind::kFoodLifted, 10000, 10400, EventValue::kSpoon),
                        Ev(EventKind::kFoodToMouth, 11000, 11500, EventValue::kFork)};
    const std::vector<SessionAnnotations> w{t};
    CHECK(GapSamples(w, EventKind::kFoodLifted, EventKind::kFoodToMouth).empty());
  }
  SUBCASE("pairs spanning a disruption are skipped") {
    SessionAnnotations t;
    t.duration_ms = 60000;
    t.seat_events(1) = {Ev(EventKind::kFoodLifted, 10000, 10400),
                        Ev(EventKind::kDisruption, 10500, 11000, EventValue::kLightOff),
                        Ev(EventKind::kFoodToMouth, 12000, 12500),
                        Ev(EventKind::kFoodLifted, 20000, 20400), Ev(EventKind::kFoodToMouth, 21500, 22000)};
    const std::vector<SessionAnnotations> w{t};
    const auto gg = GapSamples(w, EventKind::kFoodLifted, EventKind::kFoodToMouth);
    REQUIRE(gg.size() == 1);
    CHECK(gg[0] == 1.5);
    // The same-kind lift gap crosses the disruption too.
    CHECK(GapSamples(w, EventKind::kFoodLifted, EventKind::kFoodLifted).empty());
  }
  SUBCASE("seats do not pair with each other") {
    SessionAnnotations t;
    t.duration_ms = 60000;
    t.seat_events(1) = {Ev(EventKind::kFoodLifted, 10000, 10400)};
    t.seat_events(2) = {Ev(EventKind::kFoodToMouth, 11000, 11500)};
    const std::vector<SessionAnnotations> w{t};
    CHECK(GapSamples(w, EventKind::kFoodLifted, EventKind::kFoodToMouth).empty());
  }
}

TEST_CASE("eating rate curves") {
  SUBCASE("toy") {
    const auto raw = EatingRate(Toy(), 1, false);
    CHECK(raw.per_minute == std::vector<double>{2, 0, 0});
    const auto norm = EatingRate(Toy(), 1, true);
    CHECK(norm.per_minute == std::vector<double>{1, 0, 0});
    CHECK(norm.normalized);
  }
  SUBCASE("uniform placement is flat") {
    SessionAnnotations s;
    s.session_id = "U";
    s.duration_ms = 600000;
    for (int m = 0; m < 10; ++m) s.seat_events(3).push_back(Ev(EventKind::kFoodToMouth, m * 60000 + 30000, m * 60000 + 31000));
    const auto raw = EatingRate(s, 3, false);
    CHECK(raw.per_minute == std::vector<double>(10, 1.0));
    const auto norm = EatingRate(s, 3, true);
    REQUIRE(norm.per_minute.size() == 10);
    for (double v : norm.per_minute) CHECK(v == 0.1);
  }
  SUBCASE("all events in one minute form a spike") {
    SessionAnnotations s;
    s.duration_ms = 300000;
    for (int i = 0; i < 7; ++i) s.seat_events(2).push_back(Ev(EventKind::kFoodToMouth, 180000 + i * 5000, 180000 + i * 5000 + 800));
    const auto raw = EatingRate(s, 2, false);
    CHECK(raw.per_minute == std::vector<double>{0, 0, 0, 7, 0});
  }
  SUBCASE("events inside disruptions are not counted") {
    SessionAnnotations s;
    s.duration_ms = 120000;
    s.seat_events(1) = {Ev(EventKind::kFoodToMouth, 10000, 11000), Ev(EventKind::kFoodToMouth, 70000, 71000)};
    s.seat_events(2) = {Ev(EventKind::kDisruption, 65000, 80000, EventValue::kParticipantLeft)};
    CHECK(EatingRate(s, 1, false).per_minute == std::vector<double>{1, 0});
  }
  SUBCASE("no events") {
    SessionAnnotations s;
    s.session_id = "N";
    s.duration_ms = 60000;
    s.seat_events(1) = {Ev(EventKind::kFoodLifted, 1000, 1400)};
    try {
      EatingRate(s, 1, false);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNoEvents);
    }
  }
}

TEST_CASE("analytics invariants on synthetic sessions") {
  SyntheticConfig cfg;
  cfg.seed = 11;
  cfg.n_sessions = 4;
  cfg.duration_s = 300;
  const auto sessions = GenerateSyntheticSessions(cfg);
  std::vector<SessionAnnotations> ann;
  for (const auto& s : sessions) ann.push_back(s.annotations);
  const auto r = FullStats(ann);

  std::int64_t sum = 0;
  for (const auto& c : r.counts)
    if (!c.value) sum += c.count;
  CHECK(sum == r.total_events);
  // Per-value rows partition their kind.
  for (const auto& c : r.counts) {
    if (c.value) continue;
    std::int64_t parts = 0;
    for (const auto& p : r.counts)
      if (p.kind == c.kind && p.value) parts += p.count;
    CHECK(parts == c.count);
  }

  for (const auto& s : ann)
    for (int seat = 1; seat <= kNumSeats; ++seat) {
      const auto n = static_cast<double>(s.StartTimes(seat, EventKind::kFoodToMouth).size());
      if (n == 0) continue;
      const auto raw = EatingRate(s, seat, false);
      CHECK(std::accumulate(raw.per_minute.begin(), raw.per_minute.end(), 0.0) == n);
      const auto norm = EatingRate(s, seat, true);
      CHECK(std::accumulate(norm.per_minute.begin(), norm.per_minute.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    }

  // Without disruptions, same-kind gaps number events - 1 per seat and kind.
  for (auto kind : {EventKind::kFoodLifted, EventKind::kFoodToMouth, EventKind::kFoodEntered, EventKind::kDrinkLifted}) {
    std::size_t expect = 0;
    for (const auto& s : ann)
      for (int seat = 1; seat <= kNumSeats; ++seat) {
        const auto n = s.StartTimes(seat, kind).size();
        if (n >= 2) expect += n - 1;
      }
    CHECK(GapSamples(ann, kind, kind).size() == expect);
  }
  CHECK(r.rates.size() % 2 == 0);
}

TEST_CASE("emit report") {
  SyntheticConfig cfg;
  cfg.seed = 3;
  cfg.n_sessions = 2;
  cfg.duration_s = 240;
  std::vector<SessionAnnotations> ann;
  for (const auto& s : GenerateSyntheticSessions(cfg)) ann.push_back(s.annotations);
  const auto r = FullStats(ann);
  testing::TempDir dir("report");

  SUBCASE("csv tables read back losslessly") {
    const auto files = EmitReport(r, "csv", dir.path());
    CHECK(files.size() == 7);
    for (const auto& f : files) CHECK(std::filesystem::file_size(f) > 0);
    const auto counts = ReadCsvTable(dir / "annotation_counts.csv");
    REQUIRE(counts.size() == r.counts.size() + 1);
    CHECK(counts[0] == std::vector<std::string>{"kind", "value", "count"});
    for (std::size_t i = 0; i < r.counts.size(); ++i) {
      CHECK(ParseEventKind(counts[i + 1][0]) == r.counts[i].kind);
      CHECK(std::stoll(counts[i + 1][2]) == r.counts[i].count);
    }
    const auto durs = ReadCsvTable(dir / "annotation_durations.csv");
    REQUIRE(durs.size() == r.durations.size() + 1);
    for (std::size_t i = 0; i < r.durations.size(); ++i) {
      CHECK(std::stoll(durs[i + 1][2]) == r.durations[i].seconds.n);
      CHECK(std::stod(durs[i + 1][3]) == r.durations[i].seconds.mean);
      CHECK(std::stod(durs[i + 1][4]) == r.durations[i].seconds.std);
    }
    const auto gaps = ReadCsvTable(dir / "gaps_transition.csv");
    REQUIRE(gaps.size() == r.transition_gaps.size() + 1);
    for (std::size_t i = 0; i < r.transition_gaps.size(); ++i) {
      CHECK(ParseEventKind(gaps[i + 1][1]) == r.transition_gaps[i].to);
      CHECK(std::stod(gaps[i + 1][4]) == r.transition_gaps[i].seconds.mean);
    }
    const auto rates = ReadCsvTable(dir / "eating_rate.csv");
    std::size_t bins = 0;
    for (const auto& c : r.rates) bins += c.per_minute.size();
    CHECK(rates.size() == bins + 1);
  }
  SUBCASE("plots are deterministic") {
    EmitReport(r, "json", dir.path());
    const auto first = testing::ReadFile(dir / "eating_rate.svg");
    const auto json_first = testing::ReadFile(dir / "stats.json");
    EmitReport(FullStats(ann), "json", dir.path());
    CHECK(testing::ReadFile(dir / "eating_rate.svg") == first);
    CHECK(testing::ReadFile(dir / "stats.json") == json_first);
    CHECK(first.find("<polyline") != std::string::npos);
  }
  SUBCASE("unknown format") {
    try {
      EmitReport(r, "xlsx", dir.path());
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kIOFailure);
    }
  }
}
