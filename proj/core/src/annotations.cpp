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

#include "sonnet/annotations.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "sonnet/errors.hpp"
#include "text_util.hpp"

namespace sonnet {
namespace {

constexpr std::array<std::string_view, kNumEventKinds> kKindNames = {
    "mouth_open",     "food_entered",  "food_lifted",   "food_to_mouth",
    "drink_entered",  "drink_lifted",  "drink_to_mouth", "napkin_entered",
    "napkin_lifted",  "napkin_to_mouth", "disruption"};

constexpr std::array<std::string_view, kNumEventValues> kValueNames = {
    "fork", "knife", "spoon", "chopsticks", "hand",
    "cup",  "bottle", "light_off", "participant_left", "none"};

constexpr std::string_view kHeader = "session_id,seat,kind,value,start_ms,end_ms";

bool IsUtensil(EventValue v) {
  return v == EventValue::kFork || v == EventValue::kKnife || v == EventValue::kSpoon ||
         v == EventValue::kChopsticks || v == EventValue::kHand;
}

[[noreturn]] void RowError(ErrorCode code, std::string_view source, std::size_t line,
                           const std::string& what) {
  std::ostringstream os;
  os << source << ":" << line << ": " << what;
  throw Error(code, os.str());
}

}  // namespace

std::string_view ToString(EventKind kind) { return kKindNames[static_cast<int>(kind)]; }
std::string_view ToString(EventValue value) { return kValueNames[static_cast<int>(value)]; }

std::optional<EventKind> ParseEventKind(std::string_view text) {
  for (int i = 0; i < kNumEventKinds; ++i)
    if (kKindNames[i] == text) return static_cast<EventKind>(i);
  return std::nullopt;
}

std::optional<EventValue> ParseEventValue(std::string_view text) {
  if (text.empty()) return EventValue::kNone;
  for (int i = 0; i < kNumEventValues; ++i)
    if (kValueNames[i] == text) return static_cast<EventValue>(i);
  return std::nullopt;
}

EventFamily FamilyOf(EventKind kind) {
  switch (kind) {
    case EventKind::kFoodEntered:
    case EventKind::kFoodLifted:
    case EventKind::kFoodToMouth:
      return EventFamily::kFood;
    case EventKind::kDrinkEntered:
    case EventKind::kDrinkLifted:
    case EventKind::kDrinkToMouth:
      return EventFamily::kDrink;
    case EventKind::kNapkinEntered:
    case EventKind::kNapkinLifted:
    case EventKind::kNapkinToMouth:
      return EventFamily::kNapkin;
    default:
      return EventFamily::kOther;
  }
}

bool IsEnteredKind(EventKind k) {
  return k == EventKind::kFoodEntered || k == EventKind::kDrinkEntered ||
         k == EventKind::kNapkinEntered;
}
bool IsLiftedKind(EventKind k) {
  return k == EventKind::kFoodLifted || k == EventKind::kDrinkLifted ||
         k == EventKind::kNapkinLifted;
}
bool IsToMouthKind(EventKind k) {
  return k == EventKind::kFoodToMouth || k == EventKind::kDrinkToMouth ||
         k == EventKind::kNapkinToMouth;
}
bool IsVariableLengthKind(EventKind k) { return IsToMouthKind(k) || k == EventKind::kMouthOpen; }

bool IsLegalValue(EventKind kind, EventValue value) {
  switch (kind) {
    case EventKind::kMouthOpen:
    case EventKind::kNapkinEntered:
    case EventKind::kNapkinLifted:
    case EventKind::kNapkinToMouth:
      return value == EventValue::kNone;
    case EventKind::kFoodEntered:
      return IsUtensil(value);
    case EventKind::kFoodLifted:
    case EventKind::kFoodToMouth:
      return IsUtensil(value) || value == EventValue::kNone;
    case EventKind::kDrinkEntered:
    case EventKind::kDrinkLifted:
    case EventKind::kDrinkToMouth:
      return value == EventValue::kCup || value == EventValue::kBottle;
    case EventKind::kDisruption:
      return value == EventValue::kLightOff || value == EventValue::kParticipantLeft;
  }
  return false;
}

std::array<SeatInfo, kNumSeats> DefaultSeats(double rotation_deg) {
  std::array<SeatInfo, kNumSeats> seats;
  constexpr std::array<double, kNumSeats> base = {90.0, 210.0, 330.0};
  for (int i = 0; i < kNumSeats; ++i) {
    double a = std::fmod(base[i] + rotation_deg, 360.0);
    if (a < 0) a += 360.0;
    seats[i] = SeatInfo{i + 1, a};
  }
  return seats;
}

const std::vector<AnnotationEvent>& SessionAnnotations::seat_events(int seat) const {
  if (seat < 1 || seat > kNumSeats)
    throw Error(ErrorCode::kInvalidArgument, "seat out of range: " + std::to_string(seat));
  return events[seat - 1];
}

std::vector<AnnotationEvent>& SessionAnnotations::seat_events(int seat) {
  if (seat < 1 || seat > kNumSeats)
    throw Error(ErrorCode::kInvalidArgument, "seat out of range: " + std::to_string(seat));
  return events[seat - 1];
}

std::size_t SessionAnnotations::total_events() const {
  std::size_t n = 0;
  for (const auto& e : events) n += e.size();
  return n;
}

std::vector<std::int64_t> SessionAnnotations::StartTimes(int seat, EventKind kind) const {
  std::vector<std::int64_t> out;
  for (const auto& e : seat_events(seat))
    if (e.kind == kind) out.push_back(e.start_ms);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::pair<std::int64_t, std::int64_t>> SessionAnnotations::DisruptionIntervals() const {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (const auto& seat : events)
    for (const auto& e : seat)
      if (e.kind == EventKind::kDisruption) out.emplace_back(e.start_ms, e.end_ms);
  std::sort(out.begin(), out.end());
  return out;
}

bool SessionAnnotations::operator==(const SessionAnnotations& o) const {
  if (session_id != o.session_id || duration_ms != o.duration_ms || events != o.events)
    return false;
  for (int i = 0; i < kNumSeats; ++i)
    if (seats[i].index != o.seats[i].index || seats[i].angle_deg != o.seats[i].angle_deg)
      return false;
  return true;
}

void Canonicalize(SessionAnnotations& session) {
  for (auto& seat : session.events) std::sort(seat.begin(), seat.end());
}

SessionAnnotations ParseAnnotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIOFailure, "cannot open " + path.string());
  return ParseAnnotations(in, path.string());
}

SessionAnnotations ParseAnnotations(std::istream& in, std::string_view source) {
  SessionAnnotations session;
  bool have_header = false;
  bool have_duration = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = text::Trim(line);
    if (row.empty()) continue;
    if (row.front() == '#') {
      auto meta = text::Trim(row.substr(1));
      auto eq = meta.find('=');
      if (eq == std::string_view::npos) continue;
      auto key = text::Trim(meta.substr(0, eq));
      auto val = text::Trim(meta.substr(eq + 1));
      if (key == "duration_ms") {
        auto v = text::ParseInt(val);
        if (!v) RowError(ErrorCode::kMalformedRow, source, line_no, "bad duration_ms");
        session.duration_ms = *v;
        have_duration = true;
      } else if (key == "seat_angles") {
        auto parts = text::Split(val, ',');
        if (parts.size() != kNumSeats)
          RowError(ErrorCode::kMalformedRow, source, line_no, "seat_angles needs 3 values");
        for (int i = 0; i < kNumSeats; ++i) {
          auto a = text::ParseDouble(parts[i]);
          if (!a) RowError(ErrorCode::kMalformedRow, source, line_no, "bad seat angle");
          session.seats[i] = SeatInfo{i + 1, *a};
        }
      }
      continue;
    }
    if (!have_header) {
      if (row != kHeader)
        RowError(ErrorCode::kMalformedRow, source, line_no,
                 "expected header '" + std::string(kHeader) + "'");
      have_header = true;
      continue;
    }
    auto f = text::Split(row, ',');
    if (f.size() != 6)
      RowError(ErrorCode::kMalformedRow, source, line_no,
               "expected 6 fields, got " + std::to_string(f.size()));
    auto seat = text::ParseInt(f[1]);
    if (!seat || *seat < 1 || *seat > kNumSeats)
      RowError(ErrorCode::kMalformedRow, source, line_no, "seat must be 1, 2 or 3");
    auto kind = ParseEventKind(f[2]);
    if (!kind)
      RowError(ErrorCode::kMalformedRow, source, line_no, "unknown kind '" + std::string(f[2]) + "'");
    auto value = ParseEventValue(f[3]);
    if (!value)
      RowError(ErrorCode::kMalformedRow, source, line_no,
               "unknown value '" + std::string(f[3]) + "'");
    auto start = text::ParseInt(f[4]);
    auto end = text::ParseInt(f[5]);
    if (!start || !end || *start < 0)
      RowError(ErrorCode::kMalformedRow, source, line_no, "bad start_ms/end_ms");
    if (!IsLegalValue(*kind, *value))
      RowError(ErrorCode::kIllegalValueForKind, source, line_no,
               std::string(ToString(*value)) + " is not a legal value for " +
                   std::string(ToString(*kind)));
    if (*end <= *start)
      RowError(ErrorCode::kNonPositiveDuration, source, line_no, "end_ms must exceed start_ms");
    if (session.session_id.empty()) {
      session.session_id = std::string(f[0]);
    } else if (session.session_id != f[0]) {
      RowError(ErrorCode::kMalformedRow, source, line_no,
               "mixed session ids: '" + session.session_id + "' and '" + std::string(f[0]) + "'");
    }
    session.events[*seat - 1].push_back(AnnotationEvent{*kind, *value, *start, *end});
  }
  Canonicalize(session);
  if (!have_duration) {
    for (const auto& seat : session.events)
      for (const auto& e : seat) session.duration_ms = std::max(session.duration_ms, e.end_ms);
  }
  return session;
}

void WriteAnnotations(const SessionAnnotations& session, std::ostream& out) {
  out << "# duration_ms=" << session.duration_ms << "\n";
  out << "# seat_angles=" << text::FormatDouble(session.seats[0].angle_deg) << ","
      << text::FormatDouble(session.seats[1].angle_deg) << ","
      << text::FormatDouble(session.seats[2].angle_deg) << "\n";
  out << kHeader << "\n";
  // Rows ordered by start time across seats, then seat; the parser does not
  // depend on row order.
  struct Row {
    const AnnotationEvent* e;
    int seat;
  };
  std::vector<Row> rows;
  for (int s = 0; s < kNumSeats; ++s)
    for (const auto& e : session.events[s]) rows.push_back({&e, s + 1});
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.e->start_ms != b.e->start_ms) return a.e->start_ms < b.e->start_ms;
    return a.seat < b.seat;
  });
  for (const auto& r : rows) {
    out << session.session_id << ',' << r.seat << ',' << ToString(r.e->kind) << ','
        << ToString(r.e->value) << ',' << r.e->start_ms << ',' << r.e->end_ms << '\n';
  }
}

void WriteAnnotations(const SessionAnnotations& session, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIOFailure, "cannot write " + path.string());
  WriteAnnotations(session, out);
  if (!out) throw Error(ErrorCode::kIOFailure, "write failed: " + path.string());
}

bool ValidationReport::Has(std::string_view rule) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.rule == rule; });
}

namespace {

void CheckPairing(const std::vector<AnnotationEvent>& ev, int seat, EventFamily family,
                  ValidationReport& report) {
  // Lifts seen since the last handover, keyed by utensil value.
  std::map<EventValue, std::vector<std::size_t>> lifts;
  bool boundary = true;  // session start or right after a disruption
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const auto& e = ev[i];
    if (e.kind == EventKind::kDisruption) {
      lifts.clear();
      boundary = true;
      continue;
    }
    if (FamilyOf(e.kind) != family) continue;
    if (IsLiftedKind(e.kind)) {
      auto& prior = lifts[e.value];
      if (!prior.empty()) {
        report.violations.push_back(
            {seat, {prior.back(), i}, "duplicate_lift_before_handover",
             std::string(ToString(e.kind)) + " (" + std::string(ToString(e.value)) +
                 ") annotated twice before the next handover"});
      }
      prior.push_back(i);
    } else if (IsToMouthKind(e.kind)) {
      auto it = lifts.find(e.value);
      const bool has_lift = it != lifts.end() && !it->second.empty();
      if (!has_lift && !boundary) {
        report.violations.push_back({seat, {i}, "missing_lift",
                                     std::string(ToString(e.kind)) +
                                         " without a preceding lift of the same value"});
      }
      lifts.clear();
      boundary = false;
    }
  }
}

}  // namespace

ValidationReport ValidateSession(const SessionAnnotations& session) {
  ValidationReport report;
  if (session.total_events() == 0)
    report.violations.push_back({0, {}, "empty_session", "session has no events"});
  if (session.duration_ms <= 0)
    report.violations.push_back({0, {}, "non_positive_session_duration",
                                 "session duration must be positive"});

  for (int s = 1; s <= kNumSeats; ++s) {
    const auto& ev = session.seat_events(s);
    if (!std::is_sorted(ev.begin(), ev.end()))
      report.violations.push_back({s, {}, "unsorted", "events are not sorted by start time"});

    std::vector<std::pair<std::int64_t, std::int64_t>> disruptions;
    for (const auto& e : ev)
      if (e.kind == EventKind::kDisruption) disruptions.emplace_back(e.start_ms, e.end_ms);

    std::array<std::optional<std::size_t>, kNumEventKinds> last_of_kind;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      const auto& e = ev[i];
      if (e.end_ms <= e.start_ms)
        report.violations.push_back({s, {i}, "non_positive_duration", "end_ms <= start_ms"});
      if (e.start_ms < 0)
        report.violations.push_back({s, {i}, "negative_start", "start_ms < 0"});
      if (!IsLegalValue(e.kind, e.value))
        report.violations.push_back({s, {i}, "illegal_value",
                                     std::string(ToString(e.value)) + " for " +
                                         std::string(ToString(e.kind))});
      if (session.duration_ms > 0 && e.end_ms > session.duration_ms)
        report.violations.push_back({s, {i}, "beyond_session_end", "event ends after session"});
      if ((IsEnteredKind(e.kind) || IsLiftedKind(e.kind)) &&
          e.duration_ms() > kOnsetAnnotationMs)
        report.violations.push_back({s, {i}, "onset_too_long",
                                     std::string(ToString(e.kind)) + " longer than 400 ms"});
      if (e.kind != EventKind::kDisruption) {
        for (const auto& [a, b] : disruptions) {
          if (e.start_ms < b && e.end_ms > a) {
            report.violations.push_back(
                {s, {i}, "event_during_disruption", "annotation inside a disruption interval"});
            break;
          }
        }
      }
      auto& prev = last_of_kind[static_cast<int>(e.kind)];
      if (prev && ev[*prev].end_ms > e.start_ms)
        report.violations.push_back(
            {s, {*prev, i}, "overlap_within_tier", "overlapping annotations of one kind"});
      prev = i;
    }

    CheckPairing(ev, s, EventFamily::kFood, report);
    CheckPairing(ev, s, EventFamily::kDrink, report);
    CheckPairing(ev, s, EventFamily::kNapkin, report);

    // Each mouth_open belongs to a food handover that starts after it and
    // before the next mouth_open; a trailing mouth_open is a boundary case.
    for (std::size_t i = 0; i < ev.size(); ++i) {
      if (ev[i].kind != EventKind::kMouthOpen) continue;
      std::optional<std::int64_t> next_open;
      bool handover = false;
      for (std::size_t j = i + 1; j < ev.size(); ++j) {
        if (ev[j].kind == EventKind::kFoodToMouth && ev[j].start_ms >= ev[i].start_ms) {
          handover = true;
          break;
        }
        if (ev[j].kind == EventKind::kMouthOpen) {
          next_open = ev[j].start_ms;
          break;
        }
      }
      if (!handover && next_open)
        report.violations.push_back(
            {s, {i}, "mouth_open_without_handover", "mouth_open not followed by food_to_mouth"});
    }
  }
  return report;
}

}  // namespace sonnet
