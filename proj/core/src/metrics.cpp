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

#include "sonnet/metrics.hpp"

#include <cmath>

#include "sonnet/errors.hpp"

namespace sonnet {

Confusion CountConfusion(std::span<const std::uint8_t> predictions,
                         std::span<const std::uint8_t> labels) {
  if (predictions.size() != labels.size())
    throw Error(ErrorCode::kLengthMismatch, "predictions and labels differ in length");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] != 0, y = labels[i] != 0;
    if (p && y) ++c.tp;
    else if (p) ++c.fp;
    else if (y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Metrics MetricsFromConfusion(const Confusion& c) {
  if (c.total() == 0) throw Error(ErrorCode::kEmpty, "no predictions");
  const double tp = double(c.tp), fp = double(c.fp), fn = double(c.fn), tn = double(c.tn);
  Metrics m;
  m.accuracy = (tp + tn) / double(c.total());
  m.precision = c.tp + c.fp > 0 ? tp / (tp + fp) : 0.0;
  m.recall = c.tp + c.fn > 0 ? tp / (tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  m.mcc = den > 0 ? (tp * tn - fp * fn) / std::sqrt(den) : 0.0;
  m.nmcc = (m.mcc + 1.0) / 2.0;
  return m;
}

Metrics ComputeMetrics(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels) {
  return MetricsFromConfusion(CountConfusion(predictions, labels));
}

Metrics MeanMetrics(std::span<const Metrics> items) {
  if (items.empty()) throw Error(ErrorCode::kEmpty, "no metrics to average");
  Metrics m{0, 0, 0, 0, 0, 0};
  for (const auto& x : items) {
    m.accuracy += x.accuracy;
    m.precision += x.precision;
    m.recall += x.recall;
    m.f1 += x.f1;
    m.mcc += x.mcc;
    m.nmcc += x.nmcc;
  }
  const double n = static_cast<double>(items.size());
  m.accuracy /= n;
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  m.mcc /= n;
  m.nmcc /= n;
  return m;
}

}  // namespace sonnet
