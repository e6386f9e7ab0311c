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

#include <cstdint>
#include <span>

namespace sonnet {

struct Confusion {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::int64_t total() const { return tp + fp + fn + tn; }
};

// Precision and recall are 0 when their denominators are 0; F1 is 0 when
// precision + recall is 0; MCC is 0 when its denominator is 0.
struct Metrics {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0, mcc = 0, nmcc = 0.5;
};

Confusion CountConfusion(std::span<const std::uint8_t> predictions,
                         std::span<const std::uint8_t> labels);
Metrics MetricsFromConfusion(const Confusion& c);
// Throws Error{LengthMismatch} or Error{Empty}.
Metrics ComputeMetrics(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels);
// Field-wise unweighted mean.
Metrics MeanMetrics(std::span<const Metrics> items);

}  // namespace sonnet
