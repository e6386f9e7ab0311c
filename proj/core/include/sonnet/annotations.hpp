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

// Annotation data model for commensality sessions: one event per
// diner-object interaction, grouped per seat.

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sonnet {

inline constexpr int kNumSeats = 3;

// Nominal duration of the "*_entered" / "*_lifted" annotations.
inline constexpr std::int64_t kOnsetAnnotationMs = 400;

enum class EventKind : std::uint8_t {
  kMouthOpen,
  kFoodEntered,
  kFoodLifted,
  kFoodToMouth,
  kDrinkEntered,
  kDrinkLifted,
  kDrinkToMouth,
  kNapkinEntered,
  kNapkinLifted,
  kNapkinToMouth,
  kDisruption,
};
inline constexpr int kNumEventKinds = 11;

enum class EventValue : std::uint8_t {
  kFork,
  kKnife,
  kSpoon,
  kChopsticks,
  kHand,
  kCup,
  kBottle,
  kLightOff,
  kParticipantLeft,
  kNone,
};
inline constexpr int kNumEventValues = 10;

enum class EventFamily : std::uint8_t { kFood, kDrink, kNapkin, kOther };

std::string_view ToString(EventKind kind);
std::string_view ToString(EventValue value);
std::optional<EventKind> ParseEventKind(std::string_view text);
std::optional<EventValue> ParseEventValue(std::string_view text);

EventFamily FamilyOf(EventKind kind);
bool IsEnteredKind(EventKind kind);
bool IsLiftedKind(EventKind kind);
bool IsToMouthKind(EventKind kind);
// to_mouth kinds and mouth_open: the annotations whose length is meaningful.
bool IsVariableLengthKind(EventKind kind);

// Legal annotation values per kind.
bool IsLegalValue(EventKind kind, EventValue value);

struct AnnotationEvent {
  EventKind kind = EventKind::kFoodLifted;
  EventValue value = EventValue::kNone;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;

  std::int64_t duration_ms() const { return end_ms - start_ms; }

  // Total order: start, end, kind, value. Used to canonicalize per-seat lists.
  std::strong_ordering operator<=>(const AnnotationEvent& o) const {
    if (auto c = start_ms <=> o.start_ms; c != 0) return c;
    if (auto c = end_ms <=> o.end_ms; c != 0) return c;
    if (auto c = kind <=> o.kind; c != 0) return c;
    return value <=> o.value;
  }
  bool operator==(const AnnotationEvent&) const = default;
};

struct SeatInfo {
  int index = 1;           // 1..3
  double angle_deg = 0.0;  // direction of the seat seen from the microphone
};

// Default geometry: three diners mutually at 120 degrees.
std::array<SeatInfo, kNumSeats> DefaultSeats(double rotation_deg = 0.0);

struct SessionAnnotations {
  std::string session_id;
  std::array<SeatInfo, kNumSeats> seats = DefaultSeats();
  std::int64_t duration_ms = 0;
  std::array<std::vector<AnnotationEvent>, kNumSeats> events;  // index = seat - 1

  const std::vector<AnnotationEvent>& seat_events(int seat) const;
  std::vector<AnnotationEvent>& seat_events(int seat);
  std::size_t total_events() const;

  // Start times (ms) of one kind for one seat, ascending.
  std::vector<std::int64_t> StartTimes(int seat, EventKind kind) const;
  // Disruption intervals of every seat, merged view.
  std::vector<std::pair<std::int64_t, std::int64_t>> DisruptionIntervals() const;

  bool operator==(const SessionAnnotations&) const;
};

// Sorts every seat's list by the canonical event order.
void Canonicalize(SessionAnnotations& session);

// Flat CSV exchange format:
//   # duration_ms=<int>            (optional metadata lines)
//   # seat_angles=<a1>,<a2>,<a3>
//   session_id,seat,kind,value,start_ms,end_ms
//   S01,2,food_lifted,fork,100400,100800
// Throws Error{MalformedRow | IllegalValueForKind | NonPositiveDuration}.
SessionAnnotations ParseAnnotations(const std::filesystem::path& path);
SessionAnnotations ParseAnnotations(std::istream& in, std::string_view source = "<stream>");

void WriteAnnotations(const SessionAnnotations& session, std::ostream& out);
void WriteAnnotations(const SessionAnnotations& session, const std::filesystem::path& path);

struct Violation {
  int seat = 0;  // 0 for session-level findings
  std::vector<std::size_t> event_indices;
  std::string rule;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool empty() const { return violations.empty(); }
  std::size_t size() const { return violations.size(); }
  bool Has(std::string_view rule) const;
};

// Schema checks: legal values, 400 ms onset annotations, lift/handover
// pairing, events inside disruptions. Never throws on bad data.
ValidationReport ValidateSession(const SessionAnnotations& session);

// Converts an annotation-tool (.eaf) export for one participant into events
// for `seat`. Tiers are matched by kind name; empty annotation values map to
// `none`.
void ImportEaf(const std::filesystem::path& eaf, int seat, SessionAnnotations& session);

}  // namespace sonnet
