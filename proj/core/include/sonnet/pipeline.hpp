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

// Turns per-session streams into model-ready labeled windows.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sonnet/annotations.hpp"
#include "sonnet/features.hpp"

namespace sonnet {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kDefaultGamma = 100;

struct WindowSpec {
  double k_seconds = 6.0;
  int fps = 15;
  // Look-ahead implied by the intent marker; metadata only.
  double horizon_s = 0.0;
  // Negatives whose interval comes closer than this to a neighbouring lift
  // are dropped. 0 keeps every midpoint window.
  std::int64_t min_gap_to_positive_ms = 0;

  int frames() const;  // k_seconds * fps, must be a positive integer
  std::int64_t k_ms() const;
  void Validate() const;
};

enum class FeatureGroup { kSpeaking, kGazeHead, kBite, kBodyFace };

std::string_view ToString(FeatureGroup g);
// "speaking", "gaze_head", "bite", "body_face"; throws Error{UnknownMask}.
FeatureGroup ParseFeatureGroup(std::string_view name);

// Which feature groups a window carries. Column order inside a channel is
// s, d1..d4, o1..o168, then (user channel only) the bite pair tiled gamma times.
struct WindowLayout {
  bool speaking = true;
  bool gaze_head = true;
  bool body_face = true;
  bool bite = true;
  int gamma = kDefaultGamma;

  int social_cols() const;
  int user_cols() const { return social_cols() + bite_cols(); }
  int codiner_cols() const { return social_cols(); }
  int bite_cols() const { return bite ? 2 * gamma : 0; }
  int bite_offset() const { return social_cols(); }

  WindowLayout Without(FeatureGroup g) const;
  bool operator==(const WindowLayout&) const = default;
};

struct LabeledWindow {
  std::string session_id;
  int target_seat = 1;
  std::int64_t anchor_ms = 0;  // window end (exclusive)
  std::uint8_t label = 0;
  Matrix U;  // frames x layout.user_cols()
  Matrix L;  // frames x layout.codiner_cols()
  Matrix R;
};

// Co-diner seats as seen from `seat`.
int LeftOf(int seat);
int RightOf(int seat);

// ---- audio / speaking status ----------------------------------------------

// Index of the nearest audio frame for every video timestamp; ties go to the
// earlier audio frame. Throws Error{EmptyStream}.
std::vector<std::size_t> NearestAudioIndices(std::span<const AudioFrame> audio,
                                             std::span<const std::int64_t> video_ts);
std::vector<AudioFrame> AlignAudioToVideo(std::span<const AudioFrame> audio,
                                          std::span<const std::int64_t> video_ts);

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 100;
  std::uint64_t seed = 17;
};

struct SpeakingStatus {
  std::vector<std::array<std::uint8_t, kNumSeats>> active;  // per video frame
  std::vector<double> centroids_deg;
  std::vector<int> cluster_seat;  // seat (1..3) of each centroid
  bool degenerate = false;        // fell back to nearest-seat assignment
};

double CircularDistanceDeg(double a, double b);
// Seat whose angle is circularly nearest to `deg`; ties go to the lower seat.
int NearestSeat(double deg, const std::array<double, kNumSeats>& seat_angles);

// Circular k-means over voice-active DOA samples (k = number of seats); each
// centroid maps to its nearest seat. A seat is active on a frame iff VAD is
// on and the frame's cluster maps to it.
SpeakingStatus ComputeSpeakingStatus(std::span<const AudioFrame> aligned,
                                     const std::array<double, kNumSeats>& seat_angles,
                                     const KMeansOptions& opts = {});

// Overwrites `s` in each seat's stream from aligned audio.
void ApplySpeakingStatus(const SpeakingStatus& status, std::span<FeatureStream> streams);

// Energy-threshold stand-in for a real VAD: frames whose energy exceeds
// `threshold` are voiced.
std::vector<std::uint8_t> EnergyVad(std::span<const double> frame_energy, double threshold);

// ---- bite features --------------------------------------------------------

// count = lifts at or before t; seconds_since_last = time since the latest
// such lift, or since session start when there is none.
BiteFeatures ComputeBiteFeatures(std::span<const std::int64_t> lift_times_ms, std::int64_t t_ms);

// (b1, b2) tiled gamma times. Throws Error{InvalidArgument} for gamma < 1.
std::vector<double> ScaleBiteFeatures(const BiteFeatures& b, int gamma);

// Keeps every (source/target)-th frame from frame 0.
// Throws Error{NonIntegerDecimation}.
FeatureStream DownsampleStream(const FeatureStream& stream, int target_fps);

// Model-rate streams for one session: each raw stream is decimated to
// `target_fps`, its speaking status recomputed from `audio` (kept as-is when
// audio is empty), and the seat's annotated bite features attached.
std::vector<FeatureStream> PrepareStreams(std::span<const FeatureStream> raw,
                                          std::span<const AudioFrame> audio,
                                          const SessionAnnotations& session, int target_fps,
                                          const KMeansOptions& kmeans = {});

// ---- windows --------------------------------------------------------------

struct DroppedWindow {
  std::string session_id;
  int target_seat = 1;
  std::int64_t anchor_ms = 0;
  std::uint8_t label = 0;
  std::string reason;  // "insufficient_coverage", "disruption", "too_close_to_positive"
};

struct WindowExtraction {
  std::vector<LabeledWindow> windows;
  std::vector<DroppedWindow> dropped;
};

struct WindowAnchor {
  int target_seat = 1;
  std::int64_t anchor_ms = 0;
  std::uint8_t label = 0;
};

// Candidate windows before coverage checks: one positive ending at each
// food_lifted start, one negative centred between consecutive lifts.
std::vector<WindowAnchor> PlanWindowAnchors(const SessionAnnotations& session, int target_seat,
                                            const WindowSpec& spec);

// Bite features supplied per frame timestamp (training uses annotated lifts,
// replay uses simulated feeds).
using BiteSource = std::function<BiteFeatures(std::int64_t)>;

// Assembles the U/L/R matrices for the spec.frames() frames ending strictly
// before `anchor_ms`. Returns a reason string on failure instead of throwing.
std::string AssembleWindow(std::span<const FeatureStream> streams, int target_seat,
                           std::int64_t anchor_ms, const WindowSpec& spec,
                           const WindowLayout& layout, const BiteSource& bite,
                           LabeledWindow& out);

// Extracts windows for every seat in `target_seats` (all seats by default).
// `streams` must hold one stream per seat at spec.fps.
WindowExtraction ExtractWindows(const SessionAnnotations& session,
                                std::span<const FeatureStream> streams, const WindowSpec& spec,
                                const WindowLayout& layout, std::vector<int> target_seats = {});

// Column indices of a feature group inside the user / co-diner matrices.
std::vector<int> UserColumns(const WindowLayout& layout, FeatureGroup g);
std::vector<int> CodinerColumns(const WindowLayout& layout, FeatureGroup g);

// Drops the masked groups from every channel. Returns the reduced layout.
WindowLayout AblateWindows(std::vector<LabeledWindow>& windows, const WindowLayout& layout,
                           std::span<const FeatureGroup> masks);

}  // namespace sonnet
