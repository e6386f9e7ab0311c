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

// Dataset statistics over annotated sessions. Times are reported in seconds;
// standard deviations use the population (N) convention.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sonnet/annotations.hpp"

namespace sonnet {

struct SummaryStat {
  std::int64_t n = 0;
  double mean = 0.0;
  double std = 0.0;
};

SummaryStat Summarize(std::span<const double> values);

struct CountRow {
  EventKind kind;
  std::optional<EventValue> value;  // nullopt: all values of the kind
  std::int64_t count = 0;
};

struct DurationRow {
  EventKind kind;
  std::optional<EventValue> value;
  SummaryStat seconds;
};

struct GapRow {
  EventKind from;
  EventKind to;
  std::optional<EventValue> value;  // value of the later event; nullopt: all
  SummaryStat seconds;
};

struct RateCurve {
  std::string session_id;
  int seat = 1;
  bool normalized = false;
  std::vector<double> per_minute;
};

struct StatsReport {
  std::int64_t total_events = 0;
  std::vector<CountRow> counts;
  std::vector<DurationRow> durations;     // variable-length kinds only
  std::vector<GapRow> same_kind_gaps;
  std::vector<GapRow> transition_gaps;
  std::vector<RateCurve> rates;           // raw and normalized, per seat
};

// Counts and durations (no gaps or rates).
StatsReport AnnotationStats(std::span<const SessionAnnotations> sessions);

// Gaps measured start to start. Same-kind: consecutive events of one seat.
// Transition: each `to` event pairs with the latest `from` event of the same
// seat that started after the previous `to` and not after it (values must
// agree when both carry one). Pairs spanning a disruption of that seat are
// skipped. Returns nullopt when no pair exists.
std::optional<SummaryStat> GapStats(std::span<const SessionAnnotations> sessions, EventKind from,
                                    EventKind to, std::optional<EventValue> value = std::nullopt);
// Kind names as in the annotation schema; throws Error{UnknownKind}.
std::optional<SummaryStat> GapStats(std::span<const SessionAnnotations> sessions,
                                    std::string_view from, std::string_view to);

// Raw gap samples behind GapStats, in seconds.
std::vector<double> GapSamples(std::span<const SessionAnnotations> sessions, EventKind from, EventKind to,
                               std::optional<EventValue> value = std::nullopt);

// food_to_mouth starts per minute for one seat; events inside disruptions are
// not counted. The normalized curve divides by the seat's total.
// Throws Error{NoEvents}.
RateCurve EatingRate(const SessionAnnotations& session, int seat, bool normalize);

// Counts, durations, Table-style gaps and rate curves for every seat that
// has food_to_mouth events.
StatsReport FullStats(std::span<const SessionAnnotations> sessions);

// Writes the report tables under `dir`. format: "csv" or "json"; anything
// else throws Error{IOFailure}. Plots are SVG. Returns the files written.
std::vector<std::filesystem::path> EmitReport(const StatsReport& report, std::string_view format,
                                              const std::filesystem::path& dir);

// Minimal CSV reader (no quoting) used to read report tables back.
std::vector<std::vector<std::string>> ReadCsvTable(const std::filesystem::path& path);

// Polyline plot of the given curves.
std::string RenderRateSvg(std::span<const RateCurve> curves, const std::string& title);

}  // namespace sonnet
