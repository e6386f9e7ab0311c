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

#include "sonnet/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "sonnet/errors.hpp"

namespace sonnet {

int WindowSpec::frames() const {
  const double n = k_seconds * fps;
  const auto r = std::llround(n);
  if (r <= 0 || std::abs(n - static_cast<double>(r)) > 1e-9)
    throw Error(ErrorCode::kInvalidConfig, "k_seconds * fps must be a positive integer");
  return static_cast<int>(r);
}

std::int64_t WindowSpec::k_ms() const { return std::llround(k_seconds * 1000.0); }

void WindowSpec::Validate() const {
  if (fps <= 0) throw Error(ErrorCode::kInvalidConfig, "fps must be positive");
  if (k_seconds <= 0) throw Error(ErrorCode::kInvalidConfig, "k_seconds must be positive");
  if (min_gap_to_positive_ms < 0)
    throw Error(ErrorCode::kInvalidConfig, "min_gap_to_positive must be >= 0");
  (void)frames();
}

std::string_view ToString(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::kSpeaking: return "speaking";
    case FeatureGroup::kGazeHead: return "gaze_head";
    case FeatureGroup::kBite: return "bite";
    case FeatureGroup::kBodyFace: return "body_face";
  }
  return "?";
}

FeatureGroup ParseFeatureGroup(std::string_view name) {
  if (name == "speaking") return FeatureGroup::kSpeaking;
  if (name == "gaze_head") return FeatureGroup::kGazeHead;
  if (name == "bite") return FeatureGroup::kBite;
  if (name == "body_face") return FeatureGroup::kBodyFace;
  throw Error(ErrorCode::kUnknownMask, "unknown feature mask '" + std::string(name) + "'");
}

int WindowLayout::social_cols() const {
  return (speaking ? 1 : 0) + (gaze_head ? kGazeDim : 0) + (body_face ? kKeypointDim : 0);
}

WindowLayout WindowLayout::Without(FeatureGroup g) const {
  WindowLayout out = *this;
  switch (g) {
    case FeatureGroup::kSpeaking: out.speaking = false; break;
    case FeatureGroup::kGazeHead: out.gaze_head = false; break;
    case FeatureGroup::kBite: out.bite = false; break;
    case FeatureGroup::kBodyFace: out.body_face = false; break;
  }
  return out;
}

int LeftOf(int seat) { return seat % kNumSeats + 1; }
int RightOf(int seat) { return (seat + 1) % kNumSeats + 1; }

std::vector<std::size_t> NearestAudioIndices(std::span<const AudioFrame> audio,
                                             std::span<const std::int64_t> video_ts) {
  if (audio.empty() || video_ts.empty())
    throw Error(ErrorCode::kEmptyStream, "audio and video streams must be non-empty");
  std::vector<std::size_t> out;
  out.reserve(video_ts.size());
  for (auto t : video_ts) {
    // First frame at or after t, compared against its predecessor; ties go
    // to the earlier frame.
    auto it = std::lower_bound(audio.begin(), audio.end(), t,
                               [](const AudioFrame& a, std::int64_t v) { return a.t_ms < v; });
    std::size_t j = static_cast<std::size_t>(it - audio.begin());
    if (j == audio.size() || (j > 0 && t - audio[j - 1].t_ms <= audio[j].t_ms - t)) --j;
    out.push_back(j);
  }
  return out;
}

std::vector<AudioFrame> AlignAudioToVideo(std::span<const AudioFrame> audio,
                                          std::span<const std::int64_t> video_ts) {
  auto idx = NearestAudioIndices(audio, video_ts);
  std::vector<AudioFrame> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(audio[i]);
  return out;
}

std::vector<std::uint8_t> EnergyVad(std::span<const double> frame_energy, double threshold) {
  std::vector<std::uint8_t> out(frame_energy.size());
  for (std::size_t i = 0; i < frame_energy.size(); ++i) out[i] = frame_energy[i] > threshold;
  return out;
}

BiteFeatures ComputeBiteFeatures(std::span<const std::int64_t> lifts, std::int64_t t_ms) {
  auto it = std::upper_bound(lifts.begin(), lifts.end(), t_ms);
  const auto count = static_cast<double>(it - lifts.begin());
  const std::int64_t last = it == lifts.begin() ? 0 : *(it - 1);
  return BiteFeatures{static_cast<double>(t_ms - last) / 1000.0, count};
}

std::vector<double> ScaleBiteFeatures(const BiteFeatures& b, int gamma) {
  if (gamma < 1) throw Error(ErrorCode::kInvalidArgument, "gamma must be >= 1");
  std::vector<double> out(2 * static_cast<std::size_t>(gamma));
  for (int i = 0; i < gamma; ++i) {
    out[2 * i] = b.seconds_since_last;
    out[2 * i + 1] = b.count;
  }
  return out;
}

FeatureStream DownsampleStream(const FeatureStream& stream, int target_fps) {
  if (target_fps <= 0 || stream.fps <= 0 || stream.fps % target_fps != 0)
    throw Error(ErrorCode::kNonIntegerDecimation,
                std::to_string(stream.fps) + " fps cannot be decimated to " +
                    std::to_string(target_fps) + " fps");
  const int step = stream.fps / target_fps;
  FeatureStream out;
  out.seat = stream.seat;
  out.fps = target_fps;
  out.frames.reserve(stream.frames.size() / step + 1);
  for (std::size_t i = 0; i < stream.frames.size(); i += step) out.frames.push_back(stream.frames[i]);
  return out;
}

std::vector<FeatureStream> PrepareStreams(std::span<const FeatureStream> raw,
                                          std::span<const AudioFrame> audio,
                                          const SessionAnnotations& session, int target_fps,
                                          const KMeansOptions& kmeans) {
  std::array<double, kNumSeats> angles{};
  for (int i = 0; i < kNumSeats; ++i) angles[i] = session.seats[i].angle_deg;
  std::vector<FeatureStream> out;
  out.reserve(raw.size());
  for (const auto& r : raw) {
    FeatureStream s = DownsampleStream(r, target_fps);
    if (!audio.empty() && !s.frames.empty()) {
      std::vector<std::int64_t> ts;
      ts.reserve(s.frames.size());
      for (const auto& f : s.frames) ts.push_back(f.t_ms);
      const auto status = ComputeSpeakingStatus(AlignAudioToVideo(audio, ts), angles, kmeans);
      ApplySpeakingStatus(status, std::span<FeatureStream>(&s, 1));
    }
    const auto lifts = session.StartTimes(s.seat, EventKind::kFoodLifted);
    for (auto& f : s.frames) f.b = ComputeBiteFeatures(lifts, f.t_ms);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<WindowAnchor> PlanWindowAnchors(const SessionAnnotations& session, int target_seat,
                                            const WindowSpec& spec) {
  const auto lifts = session.StartTimes(target_seat, EventKind::kFoodLifted);
  const auto half = spec.k_ms() / 2;
  std::vector<WindowAnchor> out;
  for (auto l : lifts) out.push_back({target_seat, l, 1});
  for (std::size_t i = 0; i + 1 < lifts.size(); ++i) {
    const auto mid = (lifts[i] + lifts[i + 1]) / 2;
    out.push_back({target_seat, mid - half + spec.k_ms(), 0});
  }
  return out;
}

namespace {

const FeatureStream* FindStream(std::span<const FeatureStream> streams, int seat) {
  for (const auto& s : streams)
    if (s.seat == seat) return &s;
  return nullptr;
}

// Index of the frame in `s` within half a period of `t`, or -1.
std::ptrdiff_t MatchFrame(const FeatureStream& s, std::int64_t t) {
  auto it = std::lower_bound(s.frames.begin(), s.frames.end(), t,
                             [](const FrameFeatures& f, std::int64_t v) { return f.t_ms < v; });
  const double tol = s.period_ms() / 2.0;
  std::ptrdiff_t best = -1;
  double best_d = tol + 1e-9;
  for (auto cand : {it, it == s.frames.begin() ? it : it - 1}) {
    if (cand == s.frames.end()) continue;
    const double d = std::abs(static_cast<double>(cand->t_ms - t));
    if (d <= best_d) {
      best_d = d;
      best = cand - s.frames.begin();
    }
  }
  return best;
}

void FillSocial(const FrameFeatures& f, const WindowLayout& layout, double* row) {
  int c = 0;
  if (layout.speaking) row[c++] = f.s;
  if (layout.gaze_head)
    for (float v : f.d) row[c++] = v;
  if (layout.body_face)
    for (float v : f.o) row[c++] = v;
}

}  // namespace

std::string AssembleWindow(std::span<const FeatureStream> streams, int target_seat,
                           std::int64_t anchor_ms, const WindowSpec& spec,
                           const WindowLayout& layout, const BiteSource& bite,
                           LabeledWindow& out) {
  const int n = spec.frames();
  const FeatureStream* user = FindStream(streams, target_seat);
  const FeatureStream* left = FindStream(streams, LeftOf(target_seat));
  const FeatureStream* right = FindStream(streams, RightOf(target_seat));
  if (!user || !left || !right) return "insufficient_coverage";
  const auto& fr = user->frames;
  auto it = std::lower_bound(fr.begin(), fr.end(), anchor_ms,
                             [](const FrameFeatures& f, std::int64_t v) { return f.t_ms < v; });
  const std::ptrdiff_t end = (it - fr.begin()) - 1;
  const std::ptrdiff_t begin = end - n + 1;
  const double period = user->period_ms();
  if (end < 0 || begin < 0) return "insufficient_coverage";
  if (static_cast<double>(anchor_ms - fr[end].t_ms) > period + 1.0) return "insufficient_coverage";
  if (static_cast<double>(fr[end].t_ms - fr[begin].t_ms) > n * period + 1.0)
    return "insufficient_coverage";

  out.target_seat = target_seat;
  out.anchor_ms = anchor_ms;
  out.U.resize(n, layout.user_cols());
  out.L.resize(n, layout.codiner_cols());
  out.R.resize(n, layout.codiner_cols());
  for (int r = 0; r < n; ++r) {
    const auto& f = fr[begin + r];
    const auto li = MatchFrame(*left, f.t_ms);
    const auto ri = MatchFrame(*right, f.t_ms);
    if (li < 0 || ri < 0) return "insufficient_coverage";
    FillSocial(f, layout, out.U.row(r).data());
    FillSocial(left->frames[li], layout, out.L.row(r).data());
    FillSocial(right->frames[ri], layout, out.R.row(r).data());
    if (layout.bite) {
      const BiteFeatures b = bite(f.t_ms);
      double* dst = out.U.row(r).data() + layout.bite_offset();
      for (int g = 0; g < layout.gamma; ++g) {
        dst[2 * g] = b.seconds_since_last;
        dst[2 * g + 1] = b.count;
      }
    }
  }
  return {};
}

WindowExtraction ExtractWindows(const SessionAnnotations& session,
                                std::span<const FeatureStream> streams, const WindowSpec& spec,
                                const WindowLayout& layout, std::vector<int> target_seats) {
  spec.Validate();
  for (const auto& s : streams)
    if (s.fps != spec.fps)
      throw Error(ErrorCode::kInvalidArgument, "stream fps " + std::to_string(s.fps) +
                                                   " differs from window fps " +
                                                   std::to_string(spec.fps));
  if (target_seats.empty()) target_seats = {1, 2, 3};
  const auto disruptions = session.DisruptionIntervals();
  WindowExtraction result;
  for (int seat : target_seats) {
    const auto lifts = session.StartTimes(seat, EventKind::kFoodLifted);
    const BiteSource bite = [&lifts](std::int64_t t) { return ComputeBiteFeatures(lifts, t); };
    for (const auto& a : PlanWindowAnchors(session, seat, spec)) {
      auto drop = [&](std::string reason) {
        result.dropped.push_back({session.session_id, seat, a.anchor_ms, a.label, std::move(reason)});
      };
      if (a.label == 0 && spec.min_gap_to_positive_ms > 0) {
        const auto lo = a.anchor_ms - spec.k_ms();
        const auto hi = a.anchor_ms;
        auto next = std::lower_bound(lifts.begin(), lifts.end(), hi);
        auto prev = std::upper_bound(lifts.begin(), lifts.end(), lo);
        bool close = false;
        if (next != lifts.end() && *next - hi < spec.min_gap_to_positive_ms) close = true;
        if (prev != lifts.begin() && lo - *(prev - 1) < spec.min_gap_to_positive_ms) close = true;
        if (close) {
          drop("too_close_to_positive");
          continue;
        }
      }
      LabeledWindow w;
      w.session_id = session.session_id;
      w.label = a.label;
      auto reason = AssembleWindow(streams, seat, a.anchor_ms, spec, layout, bite, w);
      if (!reason.empty()) {
        drop(std::move(reason));
        continue;
      }
      const auto user = std::find_if(streams.begin(), streams.end(),
                                     [&](const FeatureStream& s) { return s.seat == seat; });
      auto first = std::lower_bound(user->frames.begin(), user->frames.end(), a.anchor_ms,
                                    [](const FrameFeatures& f, std::int64_t v) { return f.t_ms < v; }) -
                   spec.frames();
      const auto window_start = first->t_ms;
      const bool disrupted = std::any_of(disruptions.begin(), disruptions.end(), [&](const auto& d) {
        return d.first < a.anchor_ms && d.second > window_start;
      });
      if (disrupted) {
        drop("disruption");
        continue;
      }
      result.windows.push_back(std::move(w));
    }
  }
  return result;
}

std::vector<int> UserColumns(const WindowLayout& layout, FeatureGroup g) {
  std::vector<int> cols;
  int c = 0;
  auto take = [&](bool present, int width, bool want) {
    if (!present) return;
    for (int i = 0; i < width; ++i, ++c)
      if (want) cols.push_back(c);
  };
  take(layout.speaking, 1, g == FeatureGroup::kSpeaking);
  take(layout.gaze_head, kGazeDim, g == FeatureGroup::kGazeHead);
  take(layout.body_face, kKeypointDim, g == FeatureGroup::kBodyFace);
  take(layout.bite, 2 * layout.gamma, g == FeatureGroup::kBite);
  return cols;
}

std::vector<int> CodinerColumns(const WindowLayout& layout, FeatureGroup g) {
  if (g == FeatureGroup::kBite) return {};
  WindowLayout no_bite = layout;
  no_bite.bite = false;
  return UserColumns(no_bite, g);
}

namespace {

Matrix KeepColumns(const Matrix& m, const std::vector<int>& keep) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) out.col(j) = m.col(keep[j]);
  return out;
}

std::vector<int> Complement(int width, const std::vector<int>& drop) {
  std::vector<bool> gone(width, false);
  for (int c : drop) gone[c] = true;
  std::vector<int> keep;
  for (int c = 0; c < width; ++c)
    if (!gone[c]) keep.push_back(c);
  return keep;
}

}  // namespace

WindowLayout AblateWindows(std::vector<LabeledWindow>& windows, const WindowLayout& layout,
                           std::span<const FeatureGroup> masks) {
  std::vector<int> drop_u, drop_c;
  WindowLayout out = layout;
  for (auto g : masks) {
    auto u = UserColumns(layout, g);
    auto c = CodinerColumns(layout, g);
    drop_u.insert(drop_u.end(), u.begin(), u.end());
    drop_c.insert(drop_c.end(), c.begin(), c.end());
    out = out.Without(g);
  }
  const auto keep_u = Complement(layout.user_cols(), drop_u);
  const auto keep_c = Complement(layout.codiner_cols(), drop_c);
  for (auto& w : windows) {
    if (w.U.cols() != layout.user_cols() || w.L.cols() != layout.codiner_cols())
      throw Error(ErrorCode::kShapeMismatch, "window does not match the layout being ablated");
    w.U = KeepColumns(w.U, keep_u);
    w.L = KeepColumns(w.L, keep_c);
    w.R = KeepColumns(w.R, keep_c);
  }
  return out;
}

}  // namespace sonnet
