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

// Deterministic synthetic commensality sessions for desk-scale testing.
//
// Every seat speaks in independent turns. Lift (intent) times are produced by
// one of three generative rules:
//   co_diner      a co-diner's speech onset triggers the user's lift after a
//                 short delay, unless the user lifted less than
//                 `refractory_s` ago. The user's own o/d/s carry no label
//                 information.
//   user_private  lifts follow a renewal process and each is announced by a
//                 reach gesture in the user's own keypoints and gaze;
//                 co-diner features are independent of the labels.
//   both          co-diner triggered timing plus the reach gesture.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sonnet/annotations.hpp"
#include "sonnet/features.hpp"

namespace sonnet {

enum class LabelCoupling { kCoDiner, kUserPrivate, kBoth };

std::string_view ToString(LabelCoupling c);
LabelCoupling ParseLabelCoupling(std::string_view name);

struct SyntheticConfig {
  std::uint64_t seed = 0;
  int n_sessions = 1;
  double duration_s = 600.0;
  double mean_bite_gap_s = 30.0;
  double refractory_s = 6.0;
  double gap_shape = 1.0;  // gamma shape of user_private inter-lift gaps
  double lift_delay_min_s = 1.0;
  double lift_delay_max_s = 2.5;
  double speech_turn_min_s = 1.5;
  double speech_turn_max_s = 4.0;
  // Mean silence between a seat's turns; 0 derives it from mean_bite_gap_s so
  // that co-diner onsets produce the requested bite rate.
  double speech_silence_mean_s = 0.0;
  int fps = 30;
  double audio_hz = 20.0;
  double seat_rotation_deg = 0.0;
  double doa_noise_deg = 6.0;
  double keypoint_noise = 0.01;
  double gaze_noise = 0.03;
  double gesture_amplitude = 0.15;
  double missing_rate = 0.01;
  double drink_prob = 0.15;
  double disruption_prob = 0.0;
  LabelCoupling coupling = LabelCoupling::kBoth;
  std::string session_prefix = "S";

  // Throws Error{InvalidConfig}.
  void Validate() const;
  double SilenceMean() const;
};

struct SyntheticSession {
  SessionAnnotations annotations;
  std::vector<FeatureStream> streams;  // seats 1..3, at cfg.fps, s = ground truth
  std::vector<AudioFrame> audio;
  // Ground-truth speech turns per seat as [start_ms, end_ms).
  std::array<std::vector<std::pair<std::int64_t, std::int64_t>>, kNumSeats> turns;
};

// Minimum spacing between consecutive lifts of one seat; a full
// lift/handover sequence fits inside it.
inline constexpr std::int64_t kMinLiftSpacingMs = 3500;

// Session `index` of the configured run; (seed, index) fully determines it.
SyntheticSession GenerateSyntheticSession(const SyntheticConfig& cfg, int index = 0);
std::vector<SyntheticSession> GenerateSyntheticSessions(const SyntheticConfig& cfg);

std::string SyntheticSessionId(const SyntheticConfig& cfg, int index);

}  // namespace sonnet
