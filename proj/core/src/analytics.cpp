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

#include "sonnet/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "sonnet/errors.hpp"

namespace sonnet {

SummaryStat Summarize(std::span<const double> values) {
  SummaryStat s;
  s.n = static_cast<std::int64_t>(values.size());
  if (values.empty()) return s;
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  double sq = 0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(s.n));
  return s;
}

namespace {

constexpr std::array<EventKind, kNumEventKinds> kAllKinds = {
    EventKind::kMouthOpen,     EventKind::kFoodEntered,   EventKind::kFoodLifted,
    EventKind::kFoodToMouth,   EventKind::kDrinkEntered,  EventKind::kDrinkLifted,
    EventKind::kDrinkToMouth,  EventKind::kNapkinEntered, EventKind::kNapkinLifted,
    EventKind::kNapkinToMouth, EventKind::kDisruption};

std::vector<std::pair<std::int64_t, std::int64_t>> SeatDisruptions(const SessionAnnotations& s, int seat) {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (const auto& e : s.seat_events(seat))
    if (e.kind == EventKind::kDisruption) out.emplace_back(e.start_ms, e.end_ms);
  return out;
}

bool Spans(const std::vector<std::pair<std::int64_t, std::int64_t>>& ds, std::int64_t a, std::int64_t b) {
  return std::any_of(ds.begin(), ds.end(), [&](const auto& d) { return d.first < b && d.second > a; });
}

bool Inside(const std::vector<std::pair<std::int64_t, std::int64_t>>& ds, std::int64_t t) {
  return std::any_of(ds.begin(), ds.end(), [&](const auto& d) { return d.first <= t && t < d.second; });
}

std::vector<const AnnotationEvent*> OfKind(const SessionAnnotations& s, int seat, EventKind k) {
  std::vector<const AnnotationEvent*> out;
  for (const auto& e : s.seat_events(seat))
    if (e.kind == k) out.push_back(&e);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto* a, const auto* b) { return a->start_ms < b->start_ms; });
  return out;
}

double Seconds(std::int64_t ms) { return static_cast<double>(ms) / 1000.0; }

}  // namespace

StatsReport AnnotationStats(std::span<const SessionAnnotations> sessions) {
  StatsReport r;
  std::array<std::int64_t, kNumEventKinds> by_kind{};
  std::map<std::pair<int, int>, std::int64_t> by_value;
  std::array<std::vector<double>, kNumEventKinds> dur_kind;
  std::map<std::pair<int, int>, std::vector<double>> dur_value;
  for (const auto& s : sessions)
    for (int seat = 1; seat <= kNumSeats; ++seat)
      for (const auto& e : s.seat_events(seat)) {
        const int k = static_cast<int>(e.kind), v = static_cast<int>(e.value);
        ++r.total_events;
        ++by_kind[k];
        ++by_value[{k, v}];
        if (IsVariableLengthKind(e.kind)) {
          dur_kind[k].push_back(Seconds(e.duration_ms()));
          dur_value[{k, v}].push_back(Seconds(e.duration_ms()));
        }
      }
  for (auto kind : kAllKinds) {
    const int k = static_cast<int>(kind);
    r.counts.push_back({kind, std::nullopt, by_kind[k]});
    for (const auto& [kv, n] : by_value)
      if (kv.first == k) r.counts.push_back({kind, static_cast<EventValue>(kv.second), n});
    if (IsVariableLengthKind(kind)) {
      r.durations.push_back({kind, std::nullopt, Summarize(dur_kind[k])});
      for (const auto& [kv, d] : dur_value)
        if (kv.first == k) r.durations.push_back({kind, static_cast<EventValue>(kv.second), Summarize(d)});
    }
  }
  return r;
}

std::vector<double> GapSamples(std::span<const SessionAnnotations> sessions, EventKind from, EventKind to,
                               std::optional<EventValue> value) {
  std::vector<double> gaps;
  for (const auto& s : sessions)
    for (int seat = 1; seat <= kNumSeats; ++seat) {
      const auto dis = SeatDisruptions(s, seat);
      if (from == to) {
        auto evs = OfKind(s, seat, from);
        if (value) std::erase_if(evs, [&](const auto* e) { return e->value != *value; });
        for (std::size_t i = 1; i < evs.size(); ++i) {
          const auto a = evs[i - 1]->start_ms, b = evs[i]->start_ms;
          if (!Spans(dis, a, b)) gaps.push_back(Seconds(b - a));
        }
        continue;
      }
      const auto froms = OfKind(s, seat, from);
      const auto tos = OfKind(s, seat, to);
      std::int64_t prev_to = std::numeric_limits<std::int64_t>::min();
      std::vector<bool> used(froms.size(), false);
      for (const auto* t : tos) {
        const AnnotationEvent* best = nullptr;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < froms.size(); ++i) {
          const auto* f = froms[i];
          if (used[i] || f->start_ms <= prev_to || f->start_ms > t->start_ms) continue;
          if (f->value != EventValue::kNone && t->value != EventValue::kNone && f->value != t->value) continue;
          if (!best || f->start_ms >= best->start_ms) {
            best = f;
            best_i = i;
          }
        }
        prev_to = t->start_ms;
        if (!best) continue;
        used[best_i] = true;
        if (value && t->value != *value) continue;
        if (Spans(dis, best->start_ms, t->start_ms)) continue;
        gaps.push_back(Seconds(t->start_ms - best->start_ms));
      }
    }
  return gaps;
}

std::optional<SummaryStat> GapStats(std::span<const SessionAnnotations> sessions, EventKind from,
                                    EventKind to, std::optional<EventValue> value) {
  const auto gaps = GapSamples(sessions, from, to, value);
  if (gaps.empty()) return std::nullopt;
  return Summarize(gaps);
}

std::optional<SummaryStat> GapStats(std::span<const SessionAnnotations> sessions, std::string_view from,
                                    std::string_view to) {
  const auto f = ParseEventKind(from);
  const auto t = ParseEventKind(to);
  if (!f || !t)
    throw Error(ErrorCode::kUnknownKind,
                "unknown annotation kind '" + std::string(!f ? from : to) + "'");
  return GapStats(sessions, *f, *t);
}

RateCurve EatingRate(const SessionAnnotations& session, int seat, bool normalize) {
  const auto all_dis = session.DisruptionIntervals();
  std::vector<std::int64_t> starts;
  for (const auto& e : session.seat_events(seat))
    if (e.kind == EventKind::kFoodToMouth && !Inside(all_dis, e.start_ms)) starts.push_back(e.start_ms);
  if (starts.empty())
    throw Error(ErrorCode::kNoEvents, "seat " + std::to_string(seat) + " of session " +
                                          session.session_id + " has no food_to_mouth events");
  const std::int64_t end = std::max(session.duration_ms, *std::max_element(starts.begin(), starts.end()) + 1);
  const auto bins = static_cast<std::size_t>((end + 59999) / 60000);
  RateCurve c;
  c.session_id = session.session_id;
  c.seat = seat;
  c.normalized = normalize;
  c.per_minute.assign(bins, 0.0);
  for (auto t : starts) c.per_minute[static_cast<std::size_t>(t / 60000)] += 1.0;
  if (normalize)
    for (auto& v : c.per_minute) v /= static_cast<double>(starts.size());
  return c;
}

StatsReport FullStats(std::span<const SessionAnnotations> sessions) {
  StatsReport r = AnnotationStats(sessions);
  auto values_of = [&](EventKind k) {
    std::vector<EventValue> vals;
    for (const auto& c : r.counts)
      if (c.kind == k && c.value && *c.value != EventValue::kNone) vals.push_back(*c.value);
    return vals;
  };
  auto add = [&](std::vector<GapRow>& rows, EventKind from, EventKind to) {
    if (auto g = GapStats(sessions, from, to)) rows.push_back({from, to, std::nullopt, *g});
    for (auto v : values_of(to))
      if (auto g = GapStats(sessions, from, to, v)) rows.push_back({from, to, v, *g});
  };
  for (auto k : kAllKinds)
    if (k != EventKind::kDisruption) add(r.same_kind_gaps, k, k);
  const std::pair<EventKind, EventKind> transitions[] = {
      {EventKind::kFoodEntered, EventKind::kFoodLifted},
      {EventKind::kFoodLifted, EventKind::kFoodToMouth},
      {EventKind::kMouthOpen, EventKind::kFoodToMouth},
      {EventKind::kDrinkEntered, EventKind::kDrinkLifted},
      {EventKind::kDrinkLifted, EventKind::kDrinkToMouth},
      {EventKind::kNapkinEntered, EventKind::kNapkinLifted},
      {EventKind::kNapkinLifted, EventKind::kNapkinToMouth}};
  for (const auto& [f, t] : transitions) add(r.transition_gaps, f, t);
  for (const auto& s : sessions)
    for (int seat = 1; seat <= kNumSeats; ++seat) {
      const bool any = std::any_of(s.seat_events(seat).begin(), s.seat_events(seat).end(),
                                   [](const auto& e) { return e.kind == EventKind::kFoodToMouth; });
      if (!any) continue;
      r.rates.push_back(EatingRate(s, seat, false));
      r.rates.push_back(EatingRate(s, seat, true));
    }
  return r;
}

}  // namespace sonnet
