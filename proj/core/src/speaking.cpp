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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "sonnet/errors.hpp"
#include "sonnet/pipeline.hpp"

namespace sonnet {

double CircularDistanceDeg(double a, double b) {
  const double d = std::fmod(std::abs(NormalizeDegrees(a) - NormalizeDegrees(b)), 360.0);
  return std::min(d, 360.0 - d);
}

int NearestSeat(double deg, const std::array<double, kNumSeats>& seat_angles) {
  int best = 1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int s = 0; s < kNumSeats; ++s) {
    const double d = CircularDistanceDeg(deg, seat_angles[s]);
    if (d < best_d) {
      best_d = d;
      best = s + 1;
    }
  }
  return best;
}

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Clustering {
  std::vector<double> centroids;
  std::vector<int> assign;
  double inertia = std::numeric_limits<double>::infinity();
};

int NearestCentroid(double x, const std::vector<double>& c) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double d = CircularDistanceDeg(x, c[j]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

Clustering RunCircularKMeans(const std::vector<double>& x, int k, int max_iter,
                             std::mt19937_64& rng) {
  Clustering c;
  // k-means++ seeding on the circle.
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  c.centroids.push_back(x[pick(rng)]);
  std::vector<double> d2(x.size());
  while (static_cast<int>(c.centroids.size()) < k) {
    double total = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = CircularDistanceDeg(x[i], c.centroids[NearestCentroid(x[i], c.centroids)]);
      d2[i] = d * d;
      total += d2[i];
    }
    if (total <= 0) {
      c.centroids.push_back(x[pick(rng)]);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng);
    std::size_t chosen = x.size() - 1;
    for (std::size_t i = 0; i < x.size(); ++i) {
      r -= d2[i];
      if (r <= 0) {
        chosen = i;
        break;
      }
    }
    c.centroids.push_back(x[chosen]);
  }

  c.assign.assign(x.size(), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const int a = NearestCentroid(x[i], c.centroids);
      if (a != c.assign[i]) {
        c.assign[i] = a;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<double> sx(k, 0.0), sy(k, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      sx[c.assign[i]] += std::cos(x[i] * kDegToRad);
      sy[c.assign[i]] += std::sin(x[i] * kDegToRad);
    }
    for (int j = 0; j < k; ++j) {
      if (std::hypot(sx[j], sy[j]) > 1e-12)
        c.centroids[j] = NormalizeDegrees(std::atan2(sy[j], sx[j]) / kDegToRad);
    }
  }
  c.inertia = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = CircularDistanceDeg(x[i], c.centroids[c.assign[i]]);
    c.inertia += d * d;
  }
  return c;
}

}  // namespace

SpeakingStatus ComputeSpeakingStatus(std::span<const AudioFrame> aligned,
                                     const std::array<double, kNumSeats>& seat_angles,
                                     const KMeansOptions& opts) {
  for (int i = 0; i < kNumSeats; ++i)
    for (int j = i + 1; j < kNumSeats; ++j)
      if (CircularDistanceDeg(seat_angles[i], seat_angles[j]) == 0.0)
        throw Error(ErrorCode::kInvalidArgument, "seat angles must be distinct");

  SpeakingStatus out;
  out.active.assign(aligned.size(), {0, 0, 0});

  std::vector<double> doa;
  std::vector<std::size_t> frame_of;
  for (std::size_t f = 0; f < aligned.size(); ++f) {
    if (!aligned[f].voice_active) continue;
    doa.push_back(NormalizeDegrees(aligned[f].doa_deg));
    frame_of.push_back(f);
  }
  if (doa.empty()) return out;

  const std::set<double> distinct(doa.begin(), doa.end());
  if (static_cast<int>(distinct.size()) < kNumSeats) {
    out.degenerate = true;
    for (std::size_t i = 0; i < doa.size(); ++i)
      out.active[frame_of[i]][NearestSeat(doa[i], seat_angles) - 1] = 1;
    return out;
  }

  Clustering best;
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    std::mt19937_64 rng(opts.seed + static_cast<std::uint64_t>(r) * 0x9E3779B97F4A7C15ull);
    auto c = RunCircularKMeans(doa, kNumSeats, opts.max_iterations, rng);
    if (c.inertia < best.inertia) best = std::move(c);
  }

  // Relabel clusters in ascending centroid order so output does not depend on
  // which restart won.
  std::vector<int> order(best.centroids.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = static_cast<int>(j);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return best.centroids[a] < best.centroids[b]; });
  std::vector<int> rank(order.size());
  for (std::size_t j = 0; j < order.size(); ++j) rank[order[j]] = static_cast<int>(j);
  for (int j : order) {
    out.centroids_deg.push_back(best.centroids[j]);
    out.cluster_seat.push_back(NearestSeat(best.centroids[j], seat_angles));
  }
  for (std::size_t i = 0; i < doa.size(); ++i) {
    const int cluster = rank[best.assign[i]];
    out.active[frame_of[i]][out.cluster_seat[cluster] - 1] = 1;
  }
  return out;
}

void ApplySpeakingStatus(const SpeakingStatus& status, std::span<FeatureStream> streams) {
  for (auto& s : streams) {
    if (s.frames.size() != status.active.size())
      throw Error(ErrorCode::kShapeMismatch, "speaking status length differs from stream length");
    for (std::size_t f = 0; f < s.frames.size(); ++f) s.frames[f].s = status.active[f][s.seat - 1];
  }
}

}  // namespace sonnet
