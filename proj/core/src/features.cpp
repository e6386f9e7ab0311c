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

#include "sonnet/features.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "sonnet/errors.hpp"
#include "text_util.hpp"

namespace sonnet {
namespace {

template <typename T>
void AppendNumber(std::string& line, T v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  line.append(buf, p);
}

template <typename T>
T ParseField(std::string_view s, std::size_t line_no) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw Error(ErrorCode::kFormatError,
                "line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  return v;
}

std::string FeatureHeader(bool with_bite) {
  std::string h = "seat,t_ms,s";
  for (int i = 1; i <= kGazeDim; ++i) h += ",d" + std::to_string(i);
  for (int i = 1; i <= kKeypointDim; ++i) h += ",o" + std::to_string(i);
  if (with_bite) h += ",b_time,b_count";
  h += ",valid";
  return h;
}

}  // namespace

std::int64_t FrameTimestamp(std::int64_t index, int fps, std::int64_t origin_ms) {
  return origin_ms + static_cast<std::int64_t>(std::llround(index * 1000.0 / fps));
}

double NormalizeDegrees(double deg) {
  double a = std::fmod(deg, 360.0);
  if (a < 0) a += 360.0;
  if (a >= 360.0) a = 0.0;
  return a;
}

void FeatureStream::Validate() const {
  if (fps <= 0) throw Error(ErrorCode::kFormatError, "fps must be positive");
  const double period = period_ms();
  double last_count = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (i > 0) {
      const auto dt = f.t_ms - frames[i - 1].t_ms;
      if (dt <= 0)
        throw Error(ErrorCode::kFormatError,
                    "seat " + std::to_string(seat) + ": timestamps not strictly increasing at frame " +
                        std::to_string(i));
      if (std::abs(dt - period) > period)
        throw Error(ErrorCode::kFormatError,
                    "seat " + std::to_string(seat) + ": frame spacing " + std::to_string(dt) +
                        " ms inconsistent with " + std::to_string(fps) + " fps at frame " +
                        std::to_string(i));
    }
    if (f.b) {
      if (f.b->seconds_since_last < 0 || f.b->count < last_count)
        throw Error(ErrorCode::kFormatError,
                    "seat " + std::to_string(seat) + ": invalid bite features at frame " +
                        std::to_string(i));
      last_count = f.b->count;
    }
  }
}

void ApplyMissingSentinel(FeatureStream& stream) {
  for (auto& f : stream.frames) {
    if (!(f.valid & kKeypointsValid)) f.o.fill(0.0f);
    if (!(f.valid & kGazeValid)) f.d.fill(0.0f);
  }
}

void WriteFeatureStreams(std::span<const FeatureStream> streams, std::ostream& out) {
  bool with_bite = false;
  int fps = streams.empty() ? 15 : streams.front().fps;
  for (const auto& s : streams) {
    if (s.fps != fps) throw Error(ErrorCode::kFormatError, "streams in one file must share fps");
    for (const auto& f : s.frames) with_bite |= f.b.has_value();
  }
  out << "# fps=" << fps << "\n" << FeatureHeader(with_bite) << "\n";
  std::string line;
  for (const auto& s : streams) {
    for (const auto& f : s.frames) {
      line.clear();
      AppendNumber(line, s.seat);
      line += ',';
      AppendNumber(line, f.t_ms);
      line += ',';
      AppendNumber(line, static_cast<int>(f.s));
      for (float v : f.d) {
        line += ',';
        AppendNumber(line, v);
      }
      for (float v : f.o) {
        line += ',';
        AppendNumber(line, v);
      }
      if (with_bite) {
        // Empty fields for seats without bite features.
        line += ',';
        if (f.b) AppendNumber(line, f.b->seconds_since_last);
        line += ',';
        if (f.b) AppendNumber(line, f.b->count);
      }
      line += ',';
      AppendNumber(line, static_cast<int>(f.valid));
      line += '\n';
      out << line;
    }
  }
}

void WriteFeatureStreams(std::span<const FeatureStream> streams, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIOFailure, "cannot write " + path.string());
  WriteFeatureStreams(streams, out);
  if (!out) throw Error(ErrorCode::kIOFailure, "write failed: " + path.string());
}

std::vector<FeatureStream> ReadFeatureStreams(std::istream& in) {
  int fps = 15;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  bool with_bite = false;
  bool with_valid = false;
  std::size_t expected_fields = 0;
  std::map<int, FeatureStream> by_seat;
  while (std::getline(in, line)) {
    ++line_no;
    auto row = text::Trim(line);
    if (row.empty()) continue;
    if (row.front() == '#') {
      auto meta = text::Trim(row.substr(1));
      if (meta.starts_with("fps=")) {
        auto v = text::ParseInt(meta.substr(4));
        if (!v || *v <= 0) throw Error(ErrorCode::kFormatError, "bad fps line");
        fps = static_cast<int>(*v);
      }
      continue;
    }
    if (!have_header) {
      const std::string base = FeatureHeader(false);
      const std::string base_no_valid = base.substr(0, base.size() - 6);
      std::string h(row);
      with_valid = h.ends_with(",valid");
      if (with_valid) h = h.substr(0, h.size() - 6);
      with_bite = h.ends_with(",b_time,b_count");
      if (with_bite) h = h.substr(0, h.size() - 15);
      if (h != base_no_valid)
        throw Error(ErrorCode::kFormatError, "unexpected feature header at line " + std::to_string(line_no));
      expected_fields = 3 + kGazeDim + kKeypointDim + (with_bite ? 2 : 0) + (with_valid ? 1 : 0);
      have_header = true;
      continue;
    }
    auto f = text::Split(row, ',');
    if (f.size() != expected_fields)
      throw Error(ErrorCode::kFormatError, "line " + std::to_string(line_no) + ": expected " +
                                               std::to_string(expected_fields) + " fields");
    FrameFeatures fr;
    int seat = ParseField<int>(f[0], line_no);
    fr.t_ms = ParseField<std::int64_t>(f[1], line_no);
    fr.s = static_cast<std::uint8_t>(ParseField<int>(f[2], line_no) != 0);
    std::size_t k = 3;
    for (int i = 0; i < kGazeDim; ++i) fr.d[i] = ParseField<float>(f[k++], line_no);
    for (int i = 0; i < kKeypointDim; ++i) fr.o[i] = ParseField<float>(f[k++], line_no);
    if (with_bite && f[k].empty() && f[k + 1].empty()) {
      k += 2;
    } else if (with_bite) {
      BiteFeatures b;
      b.seconds_since_last = ParseField<double>(f[k++], line_no);
      b.count = ParseField<double>(f[k++], line_no);
      fr.b = b;
    }
    if (with_valid) fr.valid = static_cast<std::uint8_t>(ParseField<int>(f[k++], line_no));
    auto& stream = by_seat[seat];
    stream.seat = seat;
    stream.fps = fps;
    stream.frames.push_back(fr);
  }
  std::vector<FeatureStream> out;
  for (auto& [seat, s] : by_seat) {
    s.fps = fps;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<FeatureStream> ReadFeatureStreams(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIOFailure, "cannot open " + path.string());
  return ReadFeatureStreams(in);
}

void WriteAudioFrames(std::span<const AudioFrame> frames, std::ostream& out) {
  out << "t_ms,doa_deg,voice_active\n";
  std::string line;
  for (const auto& a : frames) {
    line.clear();
    AppendNumber(line, a.t_ms);
    line += ',';
    AppendNumber(line, a.doa_deg);
    line += ',';
    AppendNumber(line, static_cast<int>(a.voice_active));
    line += '\n';
    out << line;
  }
}

void WriteAudioFrames(std::span<const AudioFrame> frames, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIOFailure, "cannot write " + path.string());
  WriteAudioFrames(frames, out);
}

std::vector<AudioFrame> ReadAudioFrames(std::istream& in) {
  std::vector<AudioFrame> out;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto row = text::Trim(line);
    if (row.empty() || row.front() == '#') continue;
    if (!have_header) {
      if (row != "t_ms,doa_deg,voice_active")
        throw Error(ErrorCode::kFormatError, "unexpected audio header");
      have_header = true;
      continue;
    }
    auto f = text::Split(row, ',');
    if (f.size() != 3)
      throw Error(ErrorCode::kFormatError, "line " + std::to_string(line_no) + ": expected 3 fields");
    AudioFrame a;
    a.t_ms = ParseField<std::int64_t>(f[0], line_no);
    a.doa_deg = NormalizeDegrees(ParseField<double>(f[1], line_no));
    a.voice_active = static_cast<std::uint8_t>(ParseField<int>(f[2], line_no) != 0);
    out.push_back(a);
  }
  return out;
}

std::vector<AudioFrame> ReadAudioFrames(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIOFailure, "cannot open " + path.string());
  return ReadAudioFrames(in);
}

}  // namespace sonnet
