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

// Per-frame multimodal features and the on-disk stream formats.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace sonnet {

inline constexpr int kKeypointDim = 168;  // body + face keypoints (o)
inline constexpr int kGazeDim = 4;        // gaze and head pose angles (d)
inline constexpr int kSocialDim = 1 + kGazeDim + kKeypointDim;  // s, d, o = 173
inline constexpr int kBiteDim = 2;        // time since last bite, bite count

// Validity bits. A missing detection is stored as zeros with its bit cleared.
inline constexpr std::uint8_t kKeypointsValid = 1u << 0;
inline constexpr std::uint8_t kGazeValid = 1u << 1;
inline constexpr std::uint8_t kAllValid = kKeypointsValid | kGazeValid;

struct BiteFeatures {
  double seconds_since_last = 0.0;
  double count = 0.0;

  bool operator==(const BiteFeatures&) const = default;
};

struct FrameFeatures {
  std::int64_t t_ms = 0;
  std::array<float, kKeypointDim> o{};
  std::array<float, kGazeDim> d{};
  std::uint8_t s = 0;
  std::optional<BiteFeatures> b;  // target user only
  std::uint8_t valid = kAllValid;

  bool operator==(const FrameFeatures&) const = default;
};

struct FeatureStream {
  int seat = 1;
  int fps = 15;
  std::vector<FrameFeatures> frames;

  double period_ms() const { return 1000.0 / fps; }
  // Strictly increasing timestamps, spacing within one frame period of the
  // nominal period, non-decreasing bite counts. Throws Error{FormatError}.
  void Validate() const;

  bool operator==(const FeatureStream&) const = default;
};

// Nominal timestamp of frame `index` at `fps`, rounded to the millisecond.
std::int64_t FrameTimestamp(std::int64_t index, int fps, std::int64_t origin_ms = 0);

// Replaces o/d of frames whose validity bit is cleared with the zero sentinel.
void ApplyMissingSentinel(FeatureStream& stream);

// Feature stream CSV. Column order is normative:
//   seat,t_ms,s,d1..d4,o1..o168[,b_time,b_count][,valid]
// preceded by a "# fps=<n>" line. Rows for several seats may be interleaved.
void WriteFeatureStreams(std::span<const FeatureStream> streams, std::ostream& out);
void WriteFeatureStreams(std::span<const FeatureStream> streams, const std::filesystem::path& path);
std::vector<FeatureStream> ReadFeatureStreams(std::istream& in);
std::vector<FeatureStream> ReadFeatureStreams(const std::filesystem::path& path);

// One microphone-array message: sound direction and voice activity.
struct AudioFrame {
  std::int64_t t_ms = 0;
  double doa_deg = 0.0;  // [0, 360)
  std::uint8_t voice_active = 0;

  bool operator==(const AudioFrame&) const = default;
};

double NormalizeDegrees(double deg);

// Audio CSV: header "t_ms,doa_deg,voice_active".
void WriteAudioFrames(std::span<const AudioFrame> frames, std::ostream& out);
void WriteAudioFrames(std::span<const AudioFrame> frames, const std::filesystem::path& path);
std::vector<AudioFrame> ReadAudioFrames(std::istream& in);
std::vector<AudioFrame> ReadAudioFrames(const std::filesystem::path& path);

}  // namespace sonnet
