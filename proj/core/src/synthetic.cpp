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

#include "sonnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "sonnet/errors.hpp"
#include "sonnet/pipeline.hpp"

namespace sonnet {

std::string_view ToString(LabelCoupling c) {
  switch (c) {
    case LabelCoupling::kCoDiner: return "co_diner";
    case LabelCoupling::kUserPrivate: return "user_private";
    case LabelCoupling::kBoth: return "both";
  }
  return "?";
}

LabelCoupling ParseLabelCoupling(std::string_view name) {
  if (name == "co_diner" || name == "co-diner-only" || name == "co_diner_only")
    return LabelCoupling::kCoDiner;
  if (name == "user_private" || name == "user-private") return LabelCoupling::kUserPrivate;
  if (name == "both") return LabelCoupling::kBoth;
  throw Error(ErrorCode::kInvalidConfig, "unknown label coupling '" + std::string(name) + "'");
}

double SyntheticConfig::SilenceMean() const {
  if (speech_silence_mean_s > 0) return speech_silence_mean_s;
  const double mean_delay = 0.5 * (lift_delay_min_s + lift_delay_max_s);
  const double mean_turn = 0.5 * (speech_turn_min_s + speech_turn_max_s);
  // Two co-diners contribute onsets; the waiting time after the refractory
  // period is half a seat's inter-onset interval.
  const double inter_onset = 2.0 * (mean_bite_gap_s - refractory_s - mean_delay);
  return inter_onset - mean_turn;
}

void SyntheticConfig::Validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, m); };
  if (n_sessions < 1) fail("n_sessions must be >= 1");
  if (!(duration_s > 0)) fail("duration_s must be positive");
  if (!(mean_bite_gap_s > 0)) fail("mean_bite_gap_s must be positive");
  if (refractory_s < 0) fail("refractory_s must be >= 0");
  if (!(gap_shape > 0)) fail("gap_shape must be positive");
  if (!(lift_delay_min_s > 0) || lift_delay_max_s < lift_delay_min_s)
    fail("lift delay range must be positive and ordered");
  if (!(speech_turn_min_s > 0) || speech_turn_max_s < speech_turn_min_s)
    fail("speech turn range must be positive and ordered");
  if (fps <= 0) fail("fps must be positive");
  if (!(audio_hz > 0)) fail("audio_hz must be positive");
  if (doa_noise_deg < 0 || keypoint_noise < 0 || gaze_noise < 0) fail("noise levels must be >= 0");
  if (missing_rate < 0 || missing_rate >= 1) fail("missing_rate must be in [0, 1)");
  if (drink_prob < 0 || drink_prob > 1 || disruption_prob < 0 || disruption_prob > 1)
    fail("probabilities must be in [0, 1]");
  if (coupling == LabelCoupling::kUserPrivate && mean_bite_gap_s <= refractory_s)
    fail("mean_bite_gap_s must exceed refractory_s");
  if (!(SilenceMean() > 0))
    fail("mean_bite_gap_s too small for the refractory period and speech turn lengths");
}

std::string SyntheticSessionId(const SyntheticConfig& cfg, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", index + 1);
  return cfg.session_prefix + buf;
}

namespace {

using Rng = std::mt19937_64;
using Interval = std::pair<std::int64_t, std::int64_t>;

std::int64_t Ms(double s) { return std::llround(s * 1000.0); }

double Uniform(Rng& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

std::vector<Interval> SpeechTurns(const SyntheticConfig& cfg, Rng& rng) {
  std::vector<Interval> turns;
  std::exponential_distribution<double> silence(1.0 / cfg.SilenceMean());
  double t = silence(rng);
  while (t < cfg.duration_s) {
    const double len = Uniform(rng, cfg.speech_turn_min_s, cfg.speech_turn_max_s);
    turns.emplace_back(Ms(t), std::min(Ms(t + len), Ms(cfg.duration_s)));
    t += len + silence(rng);
  }
  return turns;
}

struct Lift {
  std::int64_t t_ms;
  std::int64_t cue_ms;  // onset of the cue that announced it
};

std::vector<Lift> CoDinerLifts(const SyntheticConfig& cfg, int seat,
                               const std::array<std::vector<Interval>, kNumSeats>& turns, Rng& rng) {
  std::vector<std::int64_t> onsets;
  for (int other : {LeftOf(seat), RightOf(seat)})
    for (const auto& t : turns[other - 1]) onsets.push_back(t.first);
  std::sort(onsets.begin(), onsets.end());
  std::vector<Lift> lifts;
  const auto end_limit = Ms(cfg.duration_s) - kMinLiftSpacingMs;
  for (auto onset : onsets) {
    const auto delay = Ms(Uniform(rng, cfg.lift_delay_min_s, cfg.lift_delay_max_s));
    const auto lift = onset + delay;
    if (!lifts.empty()) {
      const auto last = lifts.back().t_ms;
      if (onset < last + Ms(cfg.refractory_s) || lift < last + kMinLiftSpacingMs) continue;
    }
    if (lift > end_limit) break;
    lifts.push_back({lift, onset});
  }
  return lifts;
}

std::vector<Lift> PrivateLifts(const SyntheticConfig& cfg, Rng& rng) {
  const double excess = cfg.mean_bite_gap_s - cfg.refractory_s;
  std::gamma_distribution<double> gap(cfg.gap_shape, excess / cfg.gap_shape);
  std::vector<Lift> lifts;
  const auto end_limit = Ms(cfg.duration_s) - kMinLiftSpacingMs;
  std::int64_t t = Ms(gap(rng));
  while (true) {
    t = std::max<std::int64_t>(t, Ms(cfg.lift_delay_max_s));
    if (t > end_limit) break;
    const auto delay = Ms(Uniform(rng, cfg.lift_delay_min_s, cfg.lift_delay_max_s));
    lifts.push_back({t, t - delay});
    t += std::max<std::int64_t>(kMinLiftSpacingMs, Ms(cfg.refractory_s + gap(rng)));
  }
  return lifts;
}

EventValue PickUtensil(Rng& rng) {
  constexpr std::array<EventValue, 4> kUtensils = {EventValue::kFork, EventValue::kSpoon,
                                                   EventValue::kChopsticks, EventValue::kHand};
  return kUtensils[std::uniform_int_distribution<int>(0, 3)(rng)];
}

bool Overlaps(std::int64_t a0, std::int64_t a1, const std::vector<Interval>& xs) {
  return std::any_of(xs.begin(), xs.end(), [&](const Interval& x) { return a0 < x.second && a1 > x.first; });
}

// Raised-cosine bump on [t0, t1], 0 outside.
double Bump(std::int64_t t, std::int64_t t0, std::int64_t t1) {
  if (t < t0 || t > t1 || t1 <= t0) return 0.0;
  const double u = static_cast<double>(t - t0) / static_cast<double>(t1 - t0);
  return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * u));
}

// Keypoints (x, y pairs) moved by a reach: right wrist/elbow region.
constexpr int kReachFirst = 8;
constexpr int kReachLast = 15;
// Mouth region of the face keypoints, animated while speaking.
constexpr int kMouthFirst = 120;
constexpr int kMouthLast = 139;

}  // namespace

SyntheticSession GenerateSyntheticSession(const SyntheticConfig& cfg, int index) {
  cfg.Validate();
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(index), 0x50u};
  Rng rng(seq);

  SyntheticSession out;
  auto& ann = out.annotations;
  ann.session_id = SyntheticSessionId(cfg, index);
  ann.seats = DefaultSeats(cfg.seat_rotation_deg);
  ann.duration_ms = Ms(cfg.duration_s);

  for (int s = 0; s < kNumSeats; ++s) out.turns[s] = SpeechTurns(cfg, rng);

  std::vector<Interval> disruptions;
  if (std::bernoulli_distribution(cfg.disruption_prob)(rng)) {
    const double len = Uniform(rng, 5.0, 20.0);
    const double start = Uniform(rng, 0.2 * cfg.duration_s, std::max(0.2 * cfg.duration_s, 0.8 * cfg.duration_s - len));
    disruptions.emplace_back(Ms(start), Ms(start + len));
  }

  std::array<std::vector<Lift>, kNumSeats> lifts;
  for (int seat = 1; seat <= kNumSeats; ++seat) {
    lifts[seat - 1] = cfg.coupling == LabelCoupling::kUserPrivate ? PrivateLifts(cfg, rng)
                                                                   : CoDinerLifts(cfg, seat, out.turns, rng);
  }

  // Annotations: entered / lifted / mouth_open / to_mouth per bite, drinks in
  // long gaps, an optional light-off disruption on every seat.
  std::array<std::vector<Interval>, kNumSeats> gesture;
  for (int seat = 1; seat <= kNumSeats; ++seat) {
    auto& ev = ann.seat_events(seat);
    const EventValue utensil = PickUtensil(rng);
    std::int64_t prev_handover_end = 0;
    std::vector<Lift> kept;
    for (const auto& lift : lifts[seat - 1]) {
      const auto L = lift.t_ms;
      const auto mouth_open = L + Ms(Uniform(rng, 0.6, 1.2));
      const auto to_mouth = mouth_open + Ms(Uniform(rng, 0.2, 0.6));
      const auto to_mouth_end = to_mouth + Ms(Uniform(rng, 0.5, 1.3));
      const auto mouth_close = to_mouth_end + Ms(Uniform(rng, 0.0, 0.3));
      if (Overlaps(lift.cue_ms - 1000, mouth_close + 1000, disruptions)) continue;
      const bool want_entered = std::bernoulli_distribution(0.8)(rng);
      const auto entered = L - Ms(Uniform(rng, 2.0, 6.0));
      if (want_entered && entered > prev_handover_end + 200 &&
          !Overlaps(entered, entered + kOnsetAnnotationMs, disruptions))
        ev.push_back({EventKind::kFoodEntered, utensil, entered, entered + kOnsetAnnotationMs});
      ev.push_back({EventKind::kFoodLifted, utensil, L, L + kOnsetAnnotationMs});
      ev.push_back({EventKind::kMouthOpen, EventValue::kNone, mouth_open, mouth_close});
      ev.push_back({EventKind::kFoodToMouth, utensil, to_mouth, to_mouth_end});
      prev_handover_end = to_mouth_end;
      kept.push_back(lift);
      gesture[seat - 1].emplace_back(lift.cue_ms, L + 1000);
    }
    lifts[seat - 1] = kept;
    // Drinks in long gaps between handovers.
    const EventValue vessel =
        std::bernoulli_distribution(0.5)(rng) ? EventValue::kCup : EventValue::kBottle;
    for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
      const auto gap_start = kept[i].t_ms + 4000;
      const auto gap_end = kept[i + 1].cue_ms - 2000;
      const bool drink = std::bernoulli_distribution(cfg.drink_prob)(rng);
      if (!drink || gap_end - gap_start < 12000) continue;
      const auto d0 = gap_start + Ms(Uniform(rng, 0.0, (gap_end - gap_start - 8000) / 1000.0));
      if (Overlaps(d0 - 500, d0 + 8000, disruptions)) continue;
      const auto lift_t = d0 + Ms(Uniform(rng, 1.0, 3.0));
      const auto sip = lift_t + Ms(Uniform(rng, 0.8, 1.5));
      ev.push_back({EventKind::kDrinkEntered, vessel, d0, d0 + kOnsetAnnotationMs});
      ev.push_back({EventKind::kDrinkLifted, vessel, lift_t, lift_t + kOnsetAnnotationMs});
      ev.push_back({EventKind::kDrinkToMouth, vessel, sip, sip + Ms(Uniform(rng, 1.0, 3.0))});
    }
    for (const auto& d : disruptions)
      ev.push_back({EventKind::kDisruption, EventValue::kLightOff, d.first, d.second});
  }
  Canonicalize(ann);

  // Per-seat feature streams.
  const auto n_frames = static_cast<std::int64_t>(std::floor(cfg.duration_s * cfg.fps));
  const bool gestures = cfg.coupling != LabelCoupling::kCoDiner;
  std::normal_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution missing(cfg.missing_rate);
  out.streams.resize(kNumSeats);
  for (int seat = 1; seat <= kNumSeats; ++seat) {
    auto& stream = out.streams[seat - 1];
    stream.seat = seat;
    stream.fps = cfg.fps;
    stream.frames.resize(n_frames);
    std::array<float, kKeypointDim> base{};
    for (auto& v : base) v = static_cast<float>(Uniform(rng, 0.2, 0.8));
    std::array<double, kGazeDim> gaze_base{};
    for (auto& v : gaze_base) v = Uniform(rng, -0.2, 0.2);
    std::array<double, kKeypointDim> o_noise{};
    std::array<double, kGazeDim> d_noise{};
    const auto& turns = out.turns[seat - 1];
    const auto& gest = gesture[seat - 1];
    std::size_t turn_i = 0, gest_i = 0;
    const double ar = 0.9;
    const double o_sd = cfg.keypoint_noise * std::sqrt(1 - ar * ar);
    const double d_sd = cfg.gaze_noise * std::sqrt(1 - ar * ar);
    for (std::int64_t f = 0; f < n_frames; ++f) {
      auto& fr = stream.frames[f];
      fr.t_ms = FrameTimestamp(f, cfg.fps);
      while (turn_i < turns.size() && turns[turn_i].second <= fr.t_ms) ++turn_i;
      const bool speaking = turn_i < turns.size() && turns[turn_i].first <= fr.t_ms;
      fr.s = speaking ? 1 : 0;
      while (gest_i < gest.size() && gest[gest_i].second < fr.t_ms) ++gest_i;
      const double reach =
          gestures && gest_i < gest.size() ? Bump(fr.t_ms, gest[gest_i].first, gest[gest_i].second) : 0.0;
      for (int k = 0; k < kKeypointDim; ++k) {
        o_noise[k] = ar * o_noise[k] + o_sd * unit(rng);
        double v = base[k] + o_noise[k];
        if (k >= kReachFirst && k <= kReachLast) v += cfg.gesture_amplitude * reach * (k % 2 == 0 ? 1.0 : -1.0);
        if (speaking && k >= kMouthFirst && k <= kMouthLast) v += 0.02 * std::sin(0.9 * f + k);
        fr.o[k] = static_cast<float>(v);
      }
      for (int k = 0; k < kGazeDim; ++k) {
        d_noise[k] = ar * d_noise[k] + d_sd * unit(rng);
        double v = gaze_base[k] + d_noise[k];
        if (k == 1) v -= 0.4 * reach;  // gaze pitch drops toward the plate
        if (k == 3) v -= 0.25 * reach;  // head pitch follows
        fr.d[k] = static_cast<float>(v);
      }
      fr.valid = kAllValid;
      const bool in_disruption = Overlaps(fr.t_ms, fr.t_ms + 1, disruptions);
      if (in_disruption || missing(rng)) fr.valid = 0;
    }
    ApplyMissingSentinel(stream);
  }

  // Microphone messages at an irregular rate around audio_hz.
  std::vector<double> seat_angle(kNumSeats);
  for (int s = 0; s < kNumSeats; ++s) seat_angle[s] = ann.seats[s].angle_deg;
  const double step_ms = 1000.0 / cfg.audio_hz;
  std::int64_t last_t = -1;
  std::array<std::size_t, kNumSeats> cursor{};
  for (double nominal = 0; nominal < cfg.duration_s * 1000.0; nominal += step_ms) {
    auto t = std::llround(nominal + Uniform(rng, -0.1, 0.1) * step_ms);
    t = std::max<std::int64_t>(t, last_t + 1);
    last_t = t;
    int speaker = 0;
    std::int64_t latest_onset = -1;
    for (int s = 0; s < kNumSeats; ++s) {
      const auto& turns = out.turns[s];
      auto& c = cursor[s];
      while (c < turns.size() && turns[c].second <= t) ++c;
      if (c < turns.size() && turns[c].first <= t && turns[c].first > latest_onset) {
        latest_onset = turns[c].first;
        speaker = s + 1;
      }
    }
    AudioFrame a;
    a.t_ms = t;
    if (speaker > 0) {
      a.voice_active = 1;
      a.doa_deg = NormalizeDegrees(seat_angle[speaker - 1] + cfg.doa_noise_deg * unit(rng));
    } else {
      a.voice_active = 0;
      a.doa_deg = NormalizeDegrees(Uniform(rng, 0.0, 360.0));
    }
    out.audio.push_back(a);
  }
  return out;
}

std::vector<SyntheticSession> GenerateSyntheticSessions(const SyntheticConfig& cfg) {
  cfg.Validate();
  std::vector<SyntheticSession> out;
  out.reserve(cfg.n_sessions);
  for (int i = 0; i < cfg.n_sessions; ++i) out.push_back(GenerateSyntheticSession(cfg, i));
  return out;
}

}  // namespace sonnet
