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
#include <memory>
#include <span>
#include <vector>

#include "sonnet/models.hpp"
#include "sonnet/nn/layers.hpp"

namespace sonnet::detail {

using nn::Param;
using Windows = std::span<const LabeledWindow* const>;

// Per-column standardisation fitted on training data and stored with the
// weights so inference sees the same scaling.
class InputScaler {
 public:
  InputScaler() = default;
  InputScaler(const std::string& name, int width);

  // Every row of every matrix is one observation.
  void Fit(const std::vector<const Matrix*>& blocks);
  void Apply(Matrix& x) const;
  void CollectParams(std::vector<Param*>& out);
  int width() const { return static_cast<int>(mean_.value.cols()); }

 private:
  Param mean_, inv_std_;
};

class Network {
 public:
  virtual ~Network() = default;

  // Inference-mode logits, one per window.
  virtual Eigen::VectorXd Logits(Windows batch) const = 0;
  virtual void CollectParams(std::vector<Param*>& out) = 0;
  virtual void FitInputScaler(Windows batch) = 0;

  virtual bool differentiable() const { return true; }
  // Training-mode forward; keeps what Backward needs.
  virtual Eigen::VectorXd TrainForward(Windows batch);
  virtual void Backward(const Eigen::VectorXd& dlogits);

  // ReLU on/off pattern and max-pool winners of the last TrainForward; two
  // forwards with equal patterns lie on the same linear piece.
  virtual std::vector<std::int64_t> ActivationPattern() const { return {}; }

  virtual std::vector<Matrix> ProbeBlock(const LabeledWindow& w, int block) const;
  virtual Matrix TcnSequence(const LabeledWindow& w) const;
};

std::unique_ptr<Network> MakeSonnetNet(const ModelSpec& spec);
std::unique_ptr<Network> MakeTcnNet(const ModelSpec& spec);
std::unique_ptr<Network> MakeLinearNet(const ModelSpec& spec);
std::unique_ptr<Network> MakeAlwaysFeedNet();

// Linear model internals shared with FitLinearSgd.
Matrix LinearDesign(const Network& net, Windows batch);
void SetLinearWeights(Network& net, const LinearWeights& weights);

// Stacks `rows` frames of each window's matrix (selected by `pick`) into one
// (batch*rows) x cols matrix.
template <typename Pick>
Matrix StackRows(Windows batch, Eigen::Index rows, Eigen::Index cols, Pick pick) {
  Matrix out(static_cast<Eigen::Index>(batch.size()) * rows, cols);
  for (std::size_t i = 0; i < batch.size(); ++i)
    out.middleRows(static_cast<Eigen::Index>(i) * rows, rows) = pick(*batch[i]);
  return out;
}

}  // namespace sonnet::detail
